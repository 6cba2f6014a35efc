use std::path::Path;

use candle_core::{DType, Device, Tensor, D};
use serde::{Deserialize, Serialize};

use super::decode::{conf_dual, conf_single, decode_angles};
use super::grid::DoaGrid;
use crate::array::{CovarianceTensor, Label};
use crate::attack::AttackTarget;
use crate::error::{config, domain, Result};
use crate::nn::{self, batch_tensor, log_softmax_last_dim, Conv2d, Init, Linear, ParamStore};

pub const CHECKPOINT_KIND: &str = "doa_net";

/// Convolutional grid classifier layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoaNetConfig {
    pub elements: usize,
    pub num_sources: usize,
    pub grid: DoaGrid,
    pub conv_channels: Vec<usize>,
    pub kernel_size: usize,
    pub hidden_units: usize,
}

impl DoaNetConfig {
    /// Full-size layout: four 3x3 blocks of 64/128/256/512 filters and a
    /// 1024-unit hidden layer (about 35M parameters for M = 8).
    pub fn full(elements: usize, num_sources: usize, grid: DoaGrid) -> Self {
        Self {
            elements,
            num_sources,
            grid,
            conv_channels: vec![64, 128, 256, 512],
            kernel_size: 3,
            hidden_units: 1024,
        }
    }

    /// Small layout that trains in minutes on a CPU.
    pub fn desk(elements: usize, num_sources: usize, grid: DoaGrid) -> Self {
        Self {
            elements,
            num_sources,
            grid,
            conv_channels: vec![16, 32, 32, 32],
            kernel_size: 3,
            hidden_units: 128,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements == 0 || self.conv_channels.is_empty() || self.kernel_size % 2 == 0 {
            return Err(config(
                "doa_net needs elements > 0, at least one conv block and an odd kernel",
            ));
        }
        if !(1..=2).contains(&self.num_sources) || self.num_sources > self.grid.len() {
            return Err(config(
                "doa_net supports 1 or 2 sources within the grid size",
            ));
        }
        Ok(())
    }
}

/// Model output for one input.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub decoded_angles_deg: Vec<f64>,
    pub confidence_pct: f64,
}

/// Grid-classification DOA network. Softmax head for one source,
/// independent sigmoids for two.
#[derive(Clone, Debug)]
pub struct DoaClassifier {
    config: DoaNetConfig,
    params: ParamStore,
    convs: Vec<Conv2d>,
    hidden: Linear,
    head: Linear,
    dtype: DType,
}

impl DoaClassifier {
    pub fn new(config: DoaNetConfig, dtype: DType, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut init = Init::new(seed, dtype);
        let mut root = init.root();
        let pad = config.kernel_size / 2;
        let mut convs = Vec::with_capacity(config.conv_channels.len());
        let mut in_ch = crate::array::tensor::CHANNELS;
        for (i, &out_ch) in config.conv_channels.iter().enumerate() {
            convs.push(Conv2d::new(
                &mut root.pp(&format!("conv{i}")),
                in_ch,
                out_ch,
                config.kernel_size,
                pad,
            )?);
            in_ch = out_ch;
        }
        let flat = in_ch * config.elements * config.elements;
        let hidden = Linear::new(&mut root.pp("fc1"), flat, config.hidden_units)?;
        let head = Linear::new(&mut root.pp("fc2"), config.hidden_units, config.grid.len())?;
        Ok(Self {
            config,
            params: init.finish(),
            convs,
            hidden,
            head,
            dtype,
        })
    }

    pub fn config(&self) -> &DoaNetConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn grid(&self) -> &DoaGrid {
        &self.config.grid
    }

    pub fn num_sources(&self) -> usize {
        self.config.num_sources
    }

    /// `(B, 3, M, M)` to `(B, G)` logits.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let m = self.config.elements;
        match x.dims() {
            [_, 3, h, w] if *h == m && *w == m => {}
            dims => {
                return Err(domain(format!(
                    "doa_net expects (B, 3, {m}, {m}), got {dims:?}"
                )))
            }
        }
        let mut h = x.clone();
        for conv in &self.convs {
            h = conv.forward(&h)?.relu()?;
        }
        let h = h.flatten_from(1)?;
        let h = self.hidden.forward(&h)?.relu()?;
        self.head.forward(&h)
    }

    /// Per-sample training loss: cross-entropy for one source, mean binary
    /// cross-entropy over classes for two.
    pub fn per_sample_loss(&self, logits: &Tensor, labels: &[Label]) -> Result<Tensor> {
        let (b, g) = logits.dims2()?;
        if labels.len() != b {
            return Err(domain("label count does not match batch"));
        }
        for l in labels {
            if l.indices.len() != self.config.num_sources {
                return Err(config(format!(
                    "label has {} sources, model expects {}",
                    l.indices.len(),
                    self.config.num_sources
                )));
            }
            if l.indices.iter().any(|&i| i >= g) {
                return Err(domain("label index outside grid"));
            }
        }
        if self.config.num_sources == 1 {
            let idx: Vec<u32> = labels.iter().map(|l| l.indices[0] as u32).collect();
            let idx = Tensor::from_vec(idx, (b, 1), &Device::Cpu)?;
            let logp = log_softmax_last_dim(logits)?;
            Ok(logp.gather(&idx, 1)?.squeeze(1)?.neg()?)
        } else {
            let mut target = vec![0f64; b * g];
            for (row, l) in labels.iter().enumerate() {
                for &i in &l.indices {
                    target[row * g + i] = 1.0;
                }
            }
            let y = Tensor::from_vec(target, (b, g), &Device::Cpu)?.to_dtype(logits.dtype())?;
            // max(x, 0) - x*y + log(1 + exp(-|x|))
            let loss = (logits.relu()? - (logits * &y)?)?
                + logits.abs()?.neg()?.exp()?.affine(1.0, 1.0)?.log()?;
            Ok(loss?.mean(D::Minus1)?)
        }
    }

    pub fn batch(&self, inputs: &[&[f64]]) -> Result<Tensor> {
        batch_tensor(inputs, self.config.elements, self.dtype)
    }

    /// Logits for a set of inputs, processed in chunks.
    pub fn logits(&self, inputs: &[&CovarianceTensor]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(256) {
            let slices: Vec<&[f64]> = chunk.iter().map(|t| t.as_slice()).collect();
            out.extend(nn::rows_f64(&self.forward(&self.batch(&slices)?)?)?);
        }
        Ok(out)
    }

    pub fn predict(&self, inputs: &[&CovarianceTensor]) -> Result<Vec<Prediction>> {
        self.logits(inputs)?
            .into_iter()
            .map(|logits| {
                let decoded_angles_deg =
                    decode_angles(&logits, &self.config.grid, self.config.num_sources)?;
                let confidence_pct = if self.config.num_sources == 1 {
                    conf_single(&logits)
                } else {
                    conf_dual(&logits)?
                };
                Ok(Prediction {
                    logits,
                    decoded_angles_deg,
                    confidence_pct,
                })
            })
            .collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        nn::save_checkpoint(dir, CHECKPOINT_KIND, &self.params, &self.config)
    }

    pub fn load(dir: &Path, dtype: DType) -> Result<Self> {
        let cfg: DoaNetConfig = nn::read_checkpoint_config(dir, CHECKPOINT_KIND)?;
        let model = Self::new(cfg, dtype, 0)?;
        nn::load_into(dir, &model.params)?;
        Ok(model)
    }
}

impl AttackTarget for DoaClassifier {
    type Label = Label;

    fn loss_and_gradient(
        &self,
        inputs: &[&[f64]],
        labels: &[Label],
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let x = candle_core::Var::from_tensor(&self.batch(inputs)?)?;
        let logits = self.forward(x.as_tensor())?;
        let losses = self.per_sample_loss(&logits, labels)?;
        let grads = losses.sum_all()?.backward()?;
        let g = grads
            .get(x.as_tensor())
            .ok_or_else(|| domain("no gradient reached the input"))?;
        Ok((
            losses.to_dtype(DType::F64)?.to_vec1::<f64>()?,
            nn::items_f64(g)?,
        ))
    }
}
