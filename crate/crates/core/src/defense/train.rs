use candle_core::{DType, Tensor};
use candle_nn::Optimizer;
use serde::{Deserialize, Serialize};

use super::config::{DefTransformerConfig, ReconstructionNorm};
use super::model::DefTransformer;
use crate::array::Sample;
use crate::doa_net::{epoch_order, TrainSchedule};
use crate::error::{config, domain, Result};
use crate::nn;

/// Mean absolute or mean squared element error.
pub fn reconstruction_error(
    pred: &Tensor,
    target: &Tensor,
    norm: ReconstructionNorm,
) -> Result<Tensor> {
    if pred.dims() != target.dims() {
        return Err(domain(format!(
            "reconstruction shape {:?} does not match target {:?}",
            pred.dims(),
            target.dims()
        )));
    }
    let diff = (pred - target)?;
    Ok(match norm {
        ReconstructionNorm::L1 => diff.abs()?.mean_all()?,
        ReconstructionNorm::Mse => diff.sqr()?.mean_all()?,
    })
}

#[derive(Clone, Debug)]
pub struct JointLoss {
    pub total: Tensor,
    /// `‖T(x_n) − x_n‖`.
    pub recon: Tensor,
    /// `‖T(x_adv) − x_n‖`.
    pub adv_recon: Tensor,
}

/// `α·‖T(x_n) − x_n‖ + ‖T(x_adv) − x_n‖` with mean reduction.
pub fn joint_loss<F>(
    t: F,
    clean: &Tensor,
    adv: &Tensor,
    alpha: f64,
    norm: ReconstructionNorm,
) -> Result<JointLoss>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    if clean.dims() != adv.dims() {
        return Err(domain("clean and adversarial batches differ in shape"));
    }
    let recon = reconstruction_error(&t(clean)?, clean, norm)?;
    let adv_recon = reconstruction_error(&t(adv)?, clean, norm)?;
    let total = ((&recon * alpha)? + &adv_recon)?;
    Ok(JointLoss {
        total,
        recon,
        adv_recon,
    })
}

/// Learning-rate multiplier per 1-based epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Halve every five epochs (single source).
    HalveEvery5,
    /// Halve at epoch 5, then every two epochs (two sources).
    HalveAt5ThenEvery2,
}

impl LrSchedule {
    pub fn for_sources(num_sources: usize) -> Self {
        if num_sources >= 2 {
            Self::HalveAt5ThenEvery2
        } else {
            Self::HalveEvery5
        }
    }

    /// Factor applied to the base rate during `epoch` (1-based). A halving
    /// "at epoch 5" takes effect once five epochs have completed.
    pub fn factor(self, epoch: usize) -> f64 {
        let done = epoch.saturating_sub(1);
        let halvings = match self {
            Self::Constant => 0,
            Self::HalveEvery5 => done / 5,
            Self::HalveAt5ThenEvery2 if done >= 5 => 1 + (done - 5) / 2,
            Self::HalveAt5ThenEvery2 => 0,
        };
        0.5f64.powi(halvings as i32)
    }
}

/// Clean inputs with their adversarial counterparts, index-aligned.
#[derive(Clone, Debug)]
pub struct PairedSet {
    clean: Vec<Vec<f64>>,
    adv: Vec<Vec<f64>>,
}

impl PairedSet {
    pub fn new(clean: &[Sample], adv: &[Sample]) -> Result<Self> {
        if clean.len() != adv.len() {
            return Err(config(format!(
                "unpaired data: {} clean vs {} adversarial samples",
                clean.len(),
                adv.len()
            )));
        }
        if let Some(i) = clean.iter().zip(adv).position(|(c, a)| c.label != a.label) {
            return Err(config(format!(
                "unpaired data: labels differ at sample {i}"
            )));
        }
        Ok(Self {
            clean: clean.iter().map(|s| s.tensor.as_slice().to_vec()).collect(),
            adv: adv.iter().map(|s| s.tensor.as_slice().to_vec()).collect(),
        })
    }

    pub fn from_flat(clean: Vec<Vec<f64>>, adv: Vec<Vec<f64>>) -> Result<Self> {
        if clean.len() != adv.len() {
            return Err(config("unpaired data: clean and adversarial counts differ"));
        }
        Ok(Self { clean, adv })
    }

    pub fn len(&self) -> usize {
        self.clean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clean.is_empty()
    }

    fn batch(&self, model: &DefTransformer, idx: &[usize]) -> Result<(Tensor, Tensor)> {
        let c: Vec<&[f64]> = idx.iter().map(|&i| self.clean[i].as_slice()).collect();
        let a: Vec<&[f64]> = idx.iter().map(|&i| self.adv[i].as_slice()).collect();
        Ok((model.batch(&c)?, model.batch(&a)?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefenseEpoch {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    /// Validation ℓ1 of clean reconstructions.
    pub val_recon: f64,
    /// Validation ℓ1 of adversarial reconstructions against clean targets.
    pub val_adv_recon: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DefenseLog {
    pub epochs: Vec<DefenseEpoch>,
}

fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?)
}

/// Validation losses, always in ℓ1 so runs with different training norms
/// stay comparable.
pub fn validation_losses(model: &DefTransformer, val: &PairedSet) -> Result<(f64, f64)> {
    if val.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let (mut recon, mut adv) = (0.0, 0.0);
    let idx: Vec<usize> = (0..val.len()).collect();
    for chunk in idx.chunks(128) {
        let (c, a) = val.batch(model, chunk)?;
        let loss = joint_loss(
            |x| model.reconstruct(x),
            &c,
            &a,
            1.0,
            ReconstructionNorm::L1,
        )?;
        recon += scalar(&loss.recon)? * chunk.len() as f64;
        adv += scalar(&loss.adv_recon)? * chunk.len() as f64;
    }
    Ok((recon / val.len() as f64, adv / val.len() as f64))
}

/// Train a fresh Def-Transformer on paired clean/adversarial inputs.
pub fn train_defense(
    cfg: DefTransformerConfig,
    train: &PairedSet,
    val: &PairedSet,
    schedule: &TrainSchedule,
    lr_schedule: LrSchedule,
    seed: u64,
) -> Result<(DefTransformer, DefenseLog)> {
    schedule.validate()?;
    if train.is_empty() {
        return Err(config("defense training set is empty"));
    }
    let alpha = cfg.loss_weight;
    let norm = cfg.reconstruction_norm;
    let model = DefTransformer::new(cfg, DType::F32, seed)?;
    let mut opt = nn::adam(model.params(), schedule.learning_rate)?;
    let mut log = DefenseLog::default();
    for epoch in 1..=schedule.epochs {
        let lr = schedule.learning_rate * lr_schedule.factor(epoch);
        opt.set_learning_rate(lr);
        let mut total = 0.0;
        for chunk in epoch_order(train.len(), seed, epoch - 1).chunks(schedule.batch_size) {
            let (c, a) = train.batch(&model, chunk)?;
            let loss = joint_loss(|x| model.reconstruct(x), &c, &a, alpha, norm)?;
            total += scalar(&loss.total)? * chunk.len() as f64;
            opt.backward_step(&loss.total)?;
        }
        let (val_recon, val_adv_recon) = validation_losses(&model, val)?;
        let train_loss = total / train.len() as f64;
        log::info!(
            "def_transformer epoch {epoch}/{}: lr {lr:.2e} train {train_loss:.5} val recon {val_recon:.5} adv {val_adv_recon:.5}",
            schedule.epochs
        );
        log.epochs.push(DefenseEpoch {
            epoch,
            learning_rate: lr,
            train_loss,
            val_recon,
            val_adv_recon,
        });
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    fn t(v: &[f64]) -> Tensor {
        Tensor::from_vec(v.to_vec(), (1, v.len()), &Device::Cpu).unwrap()
    }

    #[test]
    fn identity_reconstructor() {
        let clean = t(&[1.0, -2.0, 0.5, 0.0]);
        let adv = t(&[1.5, -2.0, 0.0, 1.0]);
        let id = |x: &Tensor| Ok(x.clone());
        let l = joint_loss(id, &clean, &adv, 0.25, ReconstructionNorm::L1).unwrap();
        assert_eq!(scalar(&l.recon).unwrap(), 0.0);
        assert_eq!(scalar(&l.total).unwrap(), 0.5);
        let l = joint_loss(id, &clean, &clean, 0.25, ReconstructionNorm::L1).unwrap();
        assert_eq!(scalar(&l.total).unwrap(), 0.0);
        let l = joint_loss(id, &clean, &adv, 0.25, ReconstructionNorm::Mse).unwrap();
        assert_eq!(scalar(&l.total).unwrap(), (0.25 + 0.25 + 1.0) / 4.0);
        assert!(joint_loss(id, &clean, &t(&[1.0]), 0.25, ReconstructionNorm::L1).is_err());
    }

    #[test]
    fn weighting() {
        let clean = t(&[0.0, 0.0]);
        let adv = t(&[1.0, 1.0]);
        let shift = |x: &Tensor| Ok((x + 2.0)?);
        let l = joint_loss(shift, &clean, &adv, 0.25, ReconstructionNorm::L1).unwrap();
        assert_eq!(scalar(&l.recon).unwrap(), 2.0);
        assert_eq!(scalar(&l.adv_recon).unwrap(), 3.0);
        assert_eq!(scalar(&l.total).unwrap(), 3.5);
    }

    #[test]
    fn schedules() {
        let base = 1e-3;
        let s1 = LrSchedule::HalveEvery5;
        assert_eq!(base * s1.factor(1), 1e-3);
        assert_eq!(base * s1.factor(5), 1e-3);
        assert_eq!(base * s1.factor(6), 1e-3 / 2.0);
        assert_eq!(base * s1.factor(11), 1e-3 / 4.0);
        let s2 = LrSchedule::HalveAt5ThenEvery2;
        assert_eq!(base * s2.factor(5), 1e-3);
        assert_eq!(base * s2.factor(6), 1e-3 / 2.0);
        assert_eq!(base * s2.factor(7), 1e-3 / 2.0);
        assert_eq!(base * s2.factor(8), 1e-3 / 4.0);
        assert_eq!(base * s2.factor(10), 1e-3 / 8.0);
        assert_eq!(LrSchedule::for_sources(2), s2);
        assert_eq!(LrSchedule::Constant.factor(30), 1.0);
    }

    #[test]
    fn unpaired_data_is_rejected() {
        assert!(PairedSet::from_flat(vec![vec![0.0]], vec![]).is_err());
    }
}
