use candle_core::DType;
use candle_nn::Optimizer;
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{DoaClassifier, DoaNetConfig};
use crate::array::Sample;
use crate::error::{config, Result};
use crate::nn;

/// Optimiser settings shared by both trainable networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            learning_rate: 1e-3,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || !(self.learning_rate > 0.0) {
            return Err(config(
                "schedule needs epochs > 0, batch_size > 0 and a positive learning rate",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    /// Mean batch loss after each optimiser step (evaluated before the update).
    pub step_losses: Vec<f64>,
    /// Sample-weighted mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Deterministic shuffled mini-batch order for one epoch.
pub(crate) fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

/// Train a freshly initialised classifier with Adam on `samples`.
pub fn train_baseline(
    cfg: DoaNetConfig,
    samples: &[Sample],
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<(DoaClassifier, TrainingLog)> {
    schedule.validate()?;
    if let Some(s) = samples
        .iter()
        .find(|s| s.label.num_sources() != cfg.num_sources)
    {
        return Err(config(format!(
            "dataset holds {}-source labels but the model is configured for {}",
            s.label.num_sources(),
            cfg.num_sources
        )));
    }
    if let Some(s) = samples.iter().find(|s| s.tensor.elements() != cfg.elements) {
        return Err(config(format!(
            "dataset has M = {} but the model expects {}",
            s.tensor.elements(),
            cfg.elements
        )));
    }
    let model = DoaClassifier::new(cfg, DType::F32, seed)?;
    let mut opt = nn::adam(model.params(), schedule.learning_rate)?;
    let mut log = TrainingLog::default();
    for epoch in 0..schedule.epochs {
        let order = epoch_order(samples.len(), seed, epoch);
        let mut total = 0.0;
        for chunk in order.chunks(schedule.batch_size) {
            let inputs: Vec<&[f64]> = chunk
                .iter()
                .map(|&i| samples[i].tensor.as_slice())
                .collect();
            let labels: Vec<_> = chunk.iter().map(|&i| samples[i].label.clone()).collect();
            let logits = model.forward(&model.batch(&inputs)?)?;
            let loss = model.per_sample_loss(&logits, &labels)?.mean_all()?;
            let value = loss.to_dtype(DType::F64)?.to_scalar::<f64>()?;
            opt.backward_step(&loss)?;
            log.step_losses.push(value);
            total += value * chunk.len() as f64;
        }
        let mean = total / samples.len().max(1) as f64;
        log::info!(
            "doa_net epoch {}/{}: loss {mean:.5}",
            epoch + 1,
            schedule.epochs
        );
        log.epoch_losses.push(mean);
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{generate_samples, DatasetConfig, DatasetManifest, Split};
    use crate::doa_net::DoaGrid;

    fn toy() -> (DatasetConfig, Vec<Sample>) {
        let mut cfg = DatasetConfig::single_source_default();
        cfg.grid = DoaGrid::spanning(-15.0, 16.0, 1.0).unwrap();
        cfg.snr_db = vec![10.0];
        cfg.samples_per_doa = 2;
        cfg.snapshots = 256;
        let manifest = DatasetManifest::plan(&cfg, Split::Train, 3).unwrap();
        let samples = generate_samples(&manifest).unwrap();
        assert_eq!(samples.len(), 64);
        (cfg, samples)
    }

    #[test]
    fn smoke_training_decreases_loss_and_is_deterministic() {
        let (data, samples) = toy();
        let net = DoaNetConfig::desk(8, 1, data.grid.clone());
        let schedule = TrainSchedule {
            epochs: 1,
            batch_size: 16,
            learning_rate: 1e-3,
        };
        let (_, log) = train_baseline(net.clone(), &samples, &schedule, 5).unwrap();
        assert_eq!(log.step_losses.len(), 4);
        let (_, again) = train_baseline(net.clone(), &samples, &schedule, 5).unwrap();
        assert_eq!(log, again);

        // One full-size batch per epoch: every step sees the same 64 samples.
        let fixed = TrainSchedule {
            epochs: 4,
            batch_size: 64,
            learning_rate: 1e-3,
        };
        let (_, full) = train_baseline(net, &samples, &fixed, 5).unwrap();
        for w in full.step_losses[..4].windows(2) {
            assert!(w[1] < w[0], "{:?}", full.step_losses);
        }
    }

    #[test]
    fn mode_mismatch_is_rejected() {
        let (data, samples) = toy();
        let net = DoaNetConfig::desk(8, 2, data.grid.clone());
        assert!(train_baseline(net, &samples, &TrainSchedule::default(), 0).is_err());
    }
}
