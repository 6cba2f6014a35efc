use std::fmt;
use std::path::PathBuf;

use candle_core::DType;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, rmse, welch_t_test, within_tolerance, WelchResult};
use crate::array::{
    collect_snapshots_with, encode_covariance_tensor, sample_covariance, ArrayGeometry,
    CovarianceTensor, Label, Modulation, SourceScenario, WaveformConfig,
};
use crate::attack::{perturb, AttackConfig, AttackMethod};
use crate::classical::esprit_estimate;
use crate::defense::DefTransformer;
use crate::doa_net::DoaClassifier;
use crate::error::{config, Result};

/// The quantity varied across conditions, with its values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "lowercase")]
pub enum Sweep {
    Snr(Vec<f64>),
    Snapshots(Vec<usize>),
    Sir(Vec<f64>),
    Modulation(Vec<Modulation>),
    Geometry(Vec<ArrayGeometry>),
}

impl Sweep {
    pub fn axis(&self) -> &'static str {
        match self {
            Self::Snr(_) => "snr",
            Self::Snapshots(_) => "snapshots",
            Self::Sir(_) => "sir",
            Self::Modulation(_) => "modulation",
            Self::Geometry(_) => "geometry",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Snr(v) | Self::Sir(v) => v.len(),
            Self::Snapshots(v) => v.len(),
            Self::Modulation(v) => v.len(),
            Self::Geometry(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Fixed settings, each overridden by the swept axis where applicable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseCondition {
    pub snr_db: f64,
    pub snapshots: usize,
    pub modulation: Modulation,
    pub geometry: ArrayGeometry,
    #[serde(default)]
    pub waveform: WaveformConfig,
}

impl Default for BaseCondition {
    fn default() -> Self {
        Self {
            snr_db: -1.0,
            snapshots: 1024,
            modulation: Modulation::Bpsk,
            geometry: ArrayGeometry::ula(8),
            waveform: WaveformConfig::default(),
        }
    }
}

/// Off-grid test directions: `start, start+step, ..., <= stop`; with two
/// sources each entry is paired with `angle + separation`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestAngles {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub step_deg: f64,
    #[serde(default)]
    pub separation_deg: Option<f64>,
}

impl TestAngles {
    /// -89.5..=89.5 at 1 degree.
    pub fn single_source() -> Self {
        Self {
            start_deg: -89.5,
            stop_deg: 89.5,
            step_deg: 1.0,
            separation_deg: None,
        }
    }

    /// Pairs (θ, θ+3) with both in -55.5..=55.5.
    pub fn dual_source() -> Self {
        Self {
            start_deg: -55.5,
            stop_deg: 55.5,
            step_deg: 1.0,
            separation_deg: Some(3.0),
        }
    }

    pub fn sets(&self) -> Result<Vec<Vec<f64>>> {
        if !(self.step_deg > 0.0) || self.stop_deg < self.start_deg {
            return Err(config("test angles need a positive step and stop >= start"));
        }
        let sep = self.separation_deg.unwrap_or(0.0);
        let n = ((self.stop_deg - self.start_deg) / self.step_deg + 1e-9).floor() as usize + 1;
        Ok((0..n)
            .map(|i| self.start_deg + i as f64 * self.step_deg)
            .filter_map(|a| match self.separation_deg {
                None => Some(vec![a]),
                Some(_) if a + sep <= self.stop_deg + 1e-9 => Some(vec![a, a + sep]),
                Some(_) => None,
            })
            .collect())
    }
}

fn default_zeta() -> f64 {
    2.0
}

fn default_true() -> bool {
    true
}

/// One evaluation sweep. Serialised as the JSON config of `evaluate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub num_sources: usize,
    pub sweep: Sweep,
    #[serde(default)]
    pub base: BaseCondition,
    pub test_angles: TestAngles,
    pub samples_per_doa: usize,
    pub attack: AttackConfig,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    #[serde(default)]
    pub seed: u64,
    pub baseline_checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub defense_checkpoint: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub include_esprit: bool,
}

impl ExperimentConfig {
    /// SNR sweep with PGD-10 at 10 dB SIR and 5 samples per direction.
    pub fn snr_sweep(num_sources: usize, snr_db: Vec<f64>) -> Self {
        let (test_angles, samples_per_doa) = if num_sources >= 2 {
            (TestAngles::dual_source(), 10)
        } else {
            (TestAngles::single_source(), 5)
        };
        Self {
            num_sources,
            sweep: Sweep::Snr(snr_db),
            base: BaseCondition::default(),
            test_angles,
            samples_per_doa,
            attack: AttackConfig::evaluation(AttackMethod::Pgd),
            zeta: 2.0,
            seed: 0,
            baseline_checkpoint: None,
            defense_checkpoint: None,
            include_esprit: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.num_sources) {
            return Err(config("num_sources must be 1 or 2"));
        }
        if self.test_angles.separation_deg.is_some() != (self.num_sources == 2) {
            return Err(config(
                "separation_deg must be set exactly when num_sources is 2",
            ));
        }
        if !(self.zeta > 0.0) {
            return Err(config("zeta must be positive"));
        }
        self.attack.validate()
    }
}

/// One (condition, method) cell of a results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    /// `axis=value`, e.g. `snr=6`.
    pub condition: String,
    pub method: String,
    pub rmse: f64,
    pub accuracy: f64,
    pub confidence: Option<f64>,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelchRow {
    pub condition: String,
    /// `"T-ADD-N vs Baseline"`.
    pub comparison: String,
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    /// Per-sample correctness of T-ADD-N vs Baseline on clean inputs.
    pub welch: Vec<WelchRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    NoDef,
    TAdd,
    TAddN,
    Baseline,
    Esprit,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Self::NoDef,
        Self::TAdd,
        Self::TAddN,
        Self::Baseline,
        Self::Esprit,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::NoDef => "NoDef",
            Self::TAdd => "T-ADD",
            Self::TAddN => "T-ADD-N",
            Self::Baseline => "Baseline",
            Self::Esprit => "ESPRIT",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

struct Condition {
    label: String,
    snr_db: f64,
    snapshots: usize,
    modulation: Modulation,
    geometry: ArrayGeometry,
    sir_db: Option<f64>,
}

fn fmt_value(v: f64) -> String {
    format!("{v}")
}

fn conditions(cfg: &ExperimentConfig) -> Vec<Condition> {
    let b = &cfg.base;
    let base = |label: String| Condition {
        label,
        snr_db: b.snr_db,
        snapshots: b.snapshots,
        modulation: b.modulation,
        geometry: b.geometry.clone(),
        sir_db: cfg.attack.target_sir_db,
    };
    let axis = cfg.sweep.axis();
    match &cfg.sweep {
        Sweep::Snr(v) => v
            .iter()
            .map(|&s| Condition {
                snr_db: s,
                ..base(format!("{axis}={}", fmt_value(s)))
            })
            .collect(),
        Sweep::Snapshots(v) => v
            .iter()
            .map(|&k| Condition {
                snapshots: k,
                ..base(format!("{axis}={k}"))
            })
            .collect(),
        Sweep::Sir(v) => v
            .iter()
            .map(|&s| Condition {
                sir_db: Some(s),
                ..base(format!("{axis}={}", fmt_value(s)))
            })
            .collect(),
        Sweep::Modulation(v) => v
            .iter()
            .map(|&m| Condition {
                modulation: m,
                ..base(format!("{axis}={m}"))
            })
            .collect(),
        Sweep::Geometry(v) => v
            .iter()
            .map(|g| Condition {
                geometry: g.clone(),
                ..base(format!("{axis}={}", g.label()))
            })
            .collect(),
    }
}

/// Test set of one condition: clean tensors with their true angles.
fn simulate_condition(
    cfg: &ExperimentConfig,
    cond: &Condition,
    index: usize,
    model: &DoaClassifier,
) -> Result<(Vec<CovarianceTensor>, Vec<Label>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64 + 1);
    let mut tensors = Vec::new();
    let mut labels = Vec::new();
    for angles in cfg.test_angles.sets()? {
        let scenario = SourceScenario::new(angles, cond.modulation, cond.snr_db, cond.snapshots)?;
        for _ in 0..cfg.samples_per_doa {
            let x =
                collect_snapshots_with(&scenario, &cond.geometry, &cfg.base.waveform, &mut rng)?;
            tensors.push(encode_covariance_tensor(&sample_covariance(&x)?)?);
            labels.push(Label::from_angles(&scenario.angles_deg, model.grid()));
        }
    }
    Ok((tensors, labels))
}

struct Scored {
    predictions: Vec<Vec<f64>>,
    confidence: Option<Vec<f64>>,
}

fn score_model(model: &DoaClassifier, inputs: &[CovarianceTensor]) -> Result<Scored> {
    let refs: Vec<&CovarianceTensor> = inputs.iter().collect();
    let preds = model.predict(&refs)?;
    Ok(Scored {
        confidence: Some(preds.iter().map(|p| p.confidence_pct).collect()),
        predictions: preds.into_iter().map(|p| p.decoded_angles_deg).collect(),
    })
}

fn score_esprit(inputs: &[CovarianceTensor], l: usize, geometry: &ArrayGeometry) -> Result<Scored> {
    let predictions = inputs
        .iter()
        .map(|t| match esprit_estimate(&t.to_complex(), l, geometry) {
            Ok(e) => Ok(e.angles_deg),
            // A collapsed subspace yields no estimate; score it at broadside.
            Err(crate::Error::Estimation(_)) => Ok(vec![0.0; l]),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    Ok(Scored {
        predictions,
        confidence: None,
    })
}

fn row(
    condition: &str,
    method: Method,
    scored: &Scored,
    truth: &[Vec<f64>],
    zeta: f64,
) -> Result<ResultRow> {
    Ok(ResultRow {
        condition: condition.to_string(),
        method: method.label().to_string(),
        rmse: rmse(&scored.predictions, truth)?,
        accuracy: accuracy(&scored.predictions, truth, zeta)?,
        confidence: scored
            .confidence
            .as_ref()
            .map(|c| c.iter().sum::<f64>() / c.len() as f64),
        samples: truth.len(),
    })
}

fn correctness(scored: &Scored, truth: &[Vec<f64>], zeta: f64) -> Result<Vec<f64>> {
    scored
        .predictions
        .iter()
        .zip(truth)
        .map(|(p, t)| Ok(within_tolerance(p, t, zeta)? as u8 as f64))
        .collect()
}

/// Load checkpoints named in the config and run the sweep.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let path = cfg
        .baseline_checkpoint
        .as_ref()
        .ok_or_else(|| config("experiment config names no baseline_checkpoint"))?;
    let baseline = DoaClassifier::load(path, DType::F32)?;
    let defense = cfg
        .defense_checkpoint
        .as_ref()
        .map(|p| DefTransformer::load(p, DType::F32))
        .transpose()?;
    run_experiment_with_models(cfg, &baseline, defense.as_ref())
}

/// Run the sweep against in-memory models. Rows come out in axis order,
/// methods in the order NoDef, T-ADD, T-ADD-N, Baseline, ESPRIT.
pub fn run_experiment_with_models(
    cfg: &ExperimentConfig,
    baseline: &DoaClassifier,
    defense: Option<&DefTransformer>,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    if baseline.num_sources() != cfg.num_sources {
        return Err(config(format!(
            "baseline model is for {} sources, experiment for {}",
            baseline.num_sources(),
            cfg.num_sources
        )));
    }
    let mut result = ExperimentResult::default();
    for (index, cond) in conditions(cfg).iter().enumerate() {
        if cond.geometry.element_count() != baseline.config().elements {
            return Err(config(format!(
                "{} has {} elements but the baseline expects {}",
                cond.geometry.label(),
                cond.geometry.element_count(),
                baseline.config().elements
            )));
        }
        let (clean, labels) = simulate_condition(cfg, cond, index, baseline)?;
        let truth: Vec<Vec<f64>> = labels.iter().map(|l| l.angles_deg.clone()).collect();
        log::info!("{}: {} test samples", cond.label, clean.len());

        let attack = AttackConfig {
            target_sir_db: cond.sir_db,
            ..cfg.attack.clone()
        };
        let clean_flat: Vec<&[f64]> = clean.iter().map(|t| t.as_slice()).collect();
        let mut adv = Vec::with_capacity(clean.len());
        for (xs, ls) in clean_flat.chunks(256).zip(labels.chunks(256)) {
            for a in perturb(xs, ls, baseline, &attack)? {
                adv.push(CovarianceTensor::from_vec(
                    baseline.config().elements,
                    a.x_adv,
                )?);
            }
        }

        let baseline_scores = score_model(baseline, &clean)?;
        result.rows.push(row(
            &cond.label,
            Method::NoDef,
            &score_model(baseline, &adv)?,
            &truth,
            cfg.zeta,
        )?);
        if let Some(def) = defense {
            let purified_adv = def.purify(&adv.iter().collect::<Vec<_>>())?;
            let purified_clean = def.purify(&clean.iter().collect::<Vec<_>>())?;
            let tadd_n = score_model(baseline, &purified_clean)?;
            result.rows.push(row(
                &cond.label,
                Method::TAdd,
                &score_model(baseline, &purified_adv)?,
                &truth,
                cfg.zeta,
            )?);
            result
                .rows
                .push(row(&cond.label, Method::TAddN, &tadd_n, &truth, cfg.zeta)?);
            if truth.len() >= 2 {
                let WelchResult { t, df, p } = welch_t_test(
                    &correctness(&tadd_n, &truth, cfg.zeta)?,
                    &correctness(&baseline_scores, &truth, cfg.zeta)?,
                )?;
                result.welch.push(WelchRow {
                    condition: cond.label.clone(),
                    comparison: "T-ADD-N vs Baseline".into(),
                    t,
                    df,
                    p,
                });
            }
        }
        result.rows.push(row(
            &cond.label,
            Method::Baseline,
            &baseline_scores,
            &truth,
            cfg.zeta,
        )?);
        if cfg.include_esprit && cond.geometry.is_uniform() {
            let esprit = score_esprit(&adv, cfg.num_sources, &cond.geometry)?;
            result
                .rows
                .push(row(&cond.label, Method::Esprit, &esprit, &truth, cfg.zeta)?);
        }
    }
    Ok(result)
}
