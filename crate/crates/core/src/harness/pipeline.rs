//! End-to-end training: dataset, baseline classifier, adversarial pairs,
//! purification network.

use serde::{Deserialize, Serialize};

use crate::array::{
    generate_samples, CovarianceTensor, DatasetConfig, DatasetManifest, Sample, Split,
};
use crate::attack::{perturb, AttackConfig, AttackTarget};
use crate::defense::{
    train_defense, DefTransformer, DefTransformerConfig, DefenseLog, LrSchedule, PairedSet,
};
use crate::doa_net::{
    train_baseline, DoaClassifier, DoaGrid, DoaNetConfig, TrainSchedule, TrainingLog,
};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub dataset: DatasetConfig,
    pub doa_net: DoaNetConfig,
    pub defense: DefTransformerConfig,
    pub baseline_schedule: TrainSchedule,
    pub defense_schedule: TrainSchedule,
    /// Attack used to build training pairs.
    pub attack: AttackConfig,
    pub seed: u64,
}

impl PipelineConfig {
    /// Single-source run on -20..=20 degrees, five SNRs, ten samples per
    /// direction, ten epochs per network.
    pub fn desk_single_source() -> Self {
        let grid = DoaGrid::spanning(-20.0, 20.0, 1.0).expect("static grid");
        let mut dataset = DatasetConfig::single_source_default();
        dataset.grid = grid.clone();
        dataset.snr_db = vec![2.0, 4.0, 6.0, 8.0, 10.0];
        dataset.samples_per_doa = 10;
        let elements = dataset.geometry.element_count();
        let schedule = TrainSchedule {
            epochs: 10,
            ..TrainSchedule::default()
        };
        Self {
            doa_net: DoaNetConfig::desk(elements, 1, grid),
            defense: DefTransformerConfig::desk(elements),
            dataset,
            baseline_schedule: schedule.clone(),
            defense_schedule: schedule,
            attack: AttackConfig::training(),
            seed: 0,
        }
    }
}

/// Attack every sample and keep labels, giving a container-compatible
/// adversarial counterpart of `samples`.
pub fn adversarial_counterparts<T: AttackTarget<Label = crate::array::Label>>(
    model: &T,
    samples: &[Sample],
    attack: &AttackConfig,
) -> Result<(Vec<Sample>, Vec<f64>)> {
    let mut out = Vec::with_capacity(samples.len());
    let mut sirs = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(256) {
        let xs: Vec<&[f64]> = chunk.iter().map(|s| s.tensor.as_slice()).collect();
        let labels: Vec<_> = chunk.iter().map(|s| s.label.clone()).collect();
        for (s, a) in chunk.iter().zip(perturb(&xs, &labels, model, attack)?) {
            sirs.push(a.achieved_sir_db);
            out.push(Sample {
                tensor: CovarianceTensor::from_vec(s.tensor.elements(), a.x_adv)?,
                label: s.label.clone(),
            });
        }
    }
    Ok((out, sirs))
}

/// Clean and adversarial training/validation sets for the defense.
#[derive(Clone, Debug)]
pub struct DefenseData {
    pub train: PairedSet,
    pub validation: PairedSet,
}

#[derive(Clone, Debug)]
pub struct TrainedPipeline {
    pub baseline: DoaClassifier,
    pub baseline_log: TrainingLog,
    pub defense: DefTransformer,
    pub defense_log: DefenseLog,
    pub data: DefenseData,
}

/// Synthesize the train and validation splits.
pub fn simulate_splits(cfg: &DatasetConfig, seed: u64) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let train = generate_samples(&DatasetManifest::plan(cfg, Split::Train, seed)?)?;
    let val = if cfg.validation_split {
        generate_samples(&DatasetManifest::plan(cfg, Split::Validation, seed)?)?
    } else {
        Vec::new()
    };
    Ok((train, val))
}

/// Pair clean splits with attacks on `baseline`.
pub fn defense_data(
    baseline: &DoaClassifier,
    train: &[Sample],
    val: &[Sample],
    attack: &AttackConfig,
) -> Result<DefenseData> {
    let (train_adv, _) = adversarial_counterparts(baseline, train, attack)?;
    let (val_adv, _) = adversarial_counterparts(baseline, val, attack)?;
    Ok(DefenseData {
        train: PairedSet::new(train, &train_adv)?,
        validation: PairedSet::new(val, &val_adv)?,
    })
}

/// Run every stage with the configured seeds.
pub fn train_pipeline(cfg: &PipelineConfig) -> Result<TrainedPipeline> {
    let (train, val) = simulate_splits(&cfg.dataset, cfg.seed)?;
    log::info!(
        "pipeline: {} training / {} validation samples",
        train.len(),
        val.len()
    );
    let (baseline, baseline_log) = train_baseline(
        cfg.doa_net.clone(),
        &train,
        &cfg.baseline_schedule,
        cfg.seed,
    )?;
    let data = defense_data(&baseline, &train, &val, &cfg.attack)?;
    let (defense, defense_log) = train_defense(
        cfg.defense.clone(),
        &data.train,
        &data.validation,
        &cfg.defense_schedule,
        LrSchedule::for_sources(cfg.dataset.num_sources),
        cfg.seed,
    )?;
    Ok(TrainedPipeline {
        baseline,
        baseline_log,
        defense,
        defense_log,
        data,
    })
}
