//! File-level operations behind each CLI subcommand. Everything here reads
//! and writes containers, checkpoints and JSON so the binary only parses
//! arguments.

use std::fs;
use std::path::{Path, PathBuf};

use candle_core::DType;
use serde::{Deserialize, Serialize};

use super::experiment::{run_experiment, ExperimentConfig, ExperimentResult};
use super::pipeline::adversarial_counterparts;
use super::report::{emit_report, read_results, welch_to_csv, ReportFormat, WELCH_FILE};
use crate::array::{
    build_training_dataset, read_container, write_container, DatasetConfig, DatasetManifest,
};
use crate::attack::{attack_success, AttackConfig};
use crate::defense::{train_defense, DefTransformerConfig, DefenseLog, LrSchedule, PairedSet};
use crate::doa_net::{train_baseline, DoaClassifier, DoaNetConfig, TrainSchedule, TrainingLog};
use crate::error::{config, Result};

pub const ATTACK_REPORT_FILE: &str = "attack_report.json";
pub const TRAINING_LOG_FILE: &str = "training_log.json";

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(fs::write(path, serde_json::to_vec_pretty(value)?)?)
}

/// Read `dir/val` when it exists.
fn read_validation(dir: &Path) -> Result<Option<(DatasetManifest, Vec<crate::array::Sample>)>> {
    let val = dir.join("val");
    if val.join("manifest.json").exists() {
        Ok(Some(read_container(&val)?))
    } else {
        Ok(None)
    }
}

/// `gen-data`: simulate the training split (and validation split).
pub fn gen_data(config_path: &Path, out: &Path, seed: u64) -> Result<DatasetManifest> {
    let cfg: DatasetConfig = read_json(config_path)?;
    build_training_dataset(&cfg, seed, out)
}

/// Convolutional layout; sizes that follow from the data are filled in
/// from the container manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoaArchitecture {
    pub conv_channels: Vec<usize>,
    pub kernel_size: usize,
    pub hidden_units: usize,
}

impl Default for DoaArchitecture {
    fn default() -> Self {
        let full = DoaNetConfig::full(8, 1, crate::doa_net::DoaGrid::single_source());
        Self {
            conv_channels: full.conv_channels,
            kernel_size: full.kernel_size,
            hidden_units: full.hidden_units,
        }
    }
}

/// JSON config of `train-doa`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainDoaConfig {
    #[serde(default)]
    pub architecture: DoaArchitecture,
    #[serde(default)]
    pub schedule: TrainSchedule,
}

/// `train-doa`: fit the baseline classifier on a container and save the
/// checkpoint with its loss log.
pub fn train_doa(data: &Path, config_path: &Path, out: &Path, seed: u64) -> Result<TrainingLog> {
    let cfg: TrainDoaConfig = read_json(config_path)?;
    let (manifest, samples) = read_container(data)?;
    let net = DoaNetConfig {
        elements: manifest.elements(),
        num_sources: manifest.num_sources,
        grid: manifest.grid.clone(),
        conv_channels: cfg.architecture.conv_channels,
        kernel_size: cfg.architecture.kernel_size,
        hidden_units: cfg.architecture.hidden_units,
    };
    let (model, log) = train_baseline(net, &samples, &cfg.schedule, seed)?;
    model.save(out)?;
    write_json(&out.join(TRAINING_LOG_FILE), &log)?;
    Ok(log)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub index: usize,
    /// `null` in JSON when the perturbation is zero (infinite SIR).
    pub achieved_sir_db: Option<f64>,
    pub success: bool,
}

/// Written next to the adversarial container.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub attack: AttackConfig,
    pub zeta: f64,
    pub success_rate: f64,
    pub samples: Vec<AttackRecord>,
}

fn attack_split(
    model: &DoaClassifier,
    mut manifest: DatasetManifest,
    samples: &[crate::array::Sample],
    attack: &AttackConfig,
    zeta: f64,
    out: &Path,
) -> Result<AttackReport> {
    let (adv, sirs) = adversarial_counterparts(model, samples, attack)?;
    let refs: Vec<_> = adv.iter().map(|s| &s.tensor).collect();
    let preds = model.predict(&refs)?;
    let mut records = Vec::with_capacity(adv.len());
    for (i, ((p, s), sir)) in preds.iter().zip(samples).zip(sirs).enumerate() {
        records.push(AttackRecord {
            index: i,
            achieved_sir_db: sir.is_finite().then_some(sir),
            success: attack_success(&p.decoded_angles_deg, &s.label.angles_deg, zeta)?,
        });
    }
    let hits = records.iter().filter(|r| r.success).count();
    let report = AttackReport {
        attack: attack.clone(),
        zeta,
        success_rate: if records.is_empty() {
            0.0
        } else {
            hits as f64 / records.len() as f64
        },
        samples: records,
    };
    manifest.provenance = Some(serde_json::json!({ "attack": attack }));
    write_container(out, &manifest, &adv)?;
    write_json(&out.join(ATTACK_REPORT_FILE), &report)?;
    Ok(report)
}

/// `attack`: perturb every sample of a container against a checkpoint.
/// A `val` sub-container is attacked too so defense training can validate.
pub fn attack(
    model_dir: &Path,
    data: &Path,
    attack: &AttackConfig,
    zeta: f64,
    out: &Path,
) -> Result<AttackReport> {
    attack.validate()?;
    let model = DoaClassifier::load(model_dir, DType::F32)?;
    let (manifest, samples) = read_container(data)?;
    let report = attack_split(&model, manifest, &samples, attack, zeta, out)?;
    if let Some((manifest, samples)) = read_validation(data)? {
        attack_split(&model, manifest, &samples, attack, zeta, &out.join("val"))?;
    }
    Ok(report)
}

/// JSON config of `train-defense`. `model.elements` is replaced by the
/// container's element count and `model.loss_weight` by `--alpha`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainDefenseConfig {
    pub model: DefTransformerConfig,
    #[serde(default)]
    pub schedule: TrainSchedule,
    /// Defaults to halving every 5 epochs for one source, at 5 and then
    /// every 2 for two.
    #[serde(default)]
    pub lr_schedule: Option<LrSchedule>,
}

fn paired(clean: &Path, adv: &Path) -> Result<(PairedSet, usize, usize)> {
    let (cm, cs) = read_container(clean)?;
    let (am, as_) = read_container(adv)?;
    if cm.elements() != am.elements() {
        return Err(config(
            "clean and adversarial containers have different array sizes",
        ));
    }
    Ok((PairedSet::new(&cs, &as_)?, cm.elements(), cm.num_sources))
}

/// `train-defense`: fit the purifier on paired clean/adversarial containers.
pub fn train_defense_cmd(
    clean: &Path,
    adv: &Path,
    config_path: &Path,
    alpha: f64,
    out: &Path,
    seed: u64,
) -> Result<DefenseLog> {
    let cfg: TrainDefenseConfig = read_json(config_path)?;
    let (train, elements, num_sources) = paired(clean, adv)?;
    let validation = if clean.join("val").exists() && adv.join("val").exists() {
        paired(&clean.join("val"), &adv.join("val"))?.0
    } else {
        PairedSet::from_flat(Vec::new(), Vec::new())?
    };
    let model_cfg = DefTransformerConfig {
        elements,
        loss_weight: alpha,
        ..cfg.model
    };
    let lr = cfg
        .lr_schedule
        .unwrap_or_else(|| LrSchedule::for_sources(num_sources));
    let (model, log) = train_defense(model_cfg, &train, &validation, &cfg.schedule, lr, seed)?;
    model.save(out)?;
    write_json(&out.join(TRAINING_LOG_FILE), &log)?;
    Ok(log)
}

/// `evaluate`: run the sweep and write `results.csv` and `welch.csv`.
pub fn evaluate(config_path: &Path, out: &Path, seed: Option<u64>) -> Result<ExperimentResult> {
    let mut cfg: ExperimentConfig = read_json(config_path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    // Relative checkpoint paths are taken relative to the config file.
    let base = config_path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &mut Option<PathBuf>| {
        if let Some(path) = p.as_mut() {
            if path.is_relative() && !path.exists() {
                *path = base.join(&*path);
            }
        }
    };
    resolve(&mut cfg.baseline_checkpoint);
    resolve(&mut cfg.defense_checkpoint);
    let result = run_experiment(&cfg)?;
    emit_report(&result.rows, ReportFormat::Csv, out)?;
    fs::write(out.join(WELCH_FILE), welch_to_csv(&result.welch)?)?;
    Ok(result)
}

/// `report`: regenerate tables or figures from a results directory.
pub fn report(dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
    emit_report(&read_results(dir)?, format, dir)
}
