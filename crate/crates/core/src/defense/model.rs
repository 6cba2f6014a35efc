use std::path::Path;

use candle_core::{DType, Device, Tensor, D};
use serde::{Deserialize, Serialize};

use super::attention::{anchored_attention, cosine_window_attention};
use super::config::DefTransformerConfig;
use crate::array::CovarianceTensor;
use crate::error::{domain, Result};
use crate::nn::{self, batch_tensor, Conv2d, Init, LayerNorm, Linear, ParamStore, Scope};

pub const CHECKPOINT_KIND: &str = "def_transformer";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StripePattern {
    pub orientation: Orientation,
    pub shifted: bool,
}

impl StripePattern {
    /// H, V, shifted-H, shifted-V.
    pub const CYCLE: [StripePattern; 4] = [
        StripePattern {
            orientation: Orientation::Horizontal,
            shifted: false,
        },
        StripePattern {
            orientation: Orientation::Vertical,
            shifted: false,
        },
        StripePattern {
            orientation: Orientation::Horizontal,
            shifted: true,
        },
        StripePattern {
            orientation: Orientation::Vertical,
            shifted: true,
        },
    ];

    pub fn for_layer(index: usize) -> Self {
        Self::CYCLE[index % 4]
    }
}

/// `(B, H, W, C)` to `(B * H/sh * W/sw, sh * sw, C)`.
fn partition(x: &Tensor, sh: usize, sw: usize) -> Result<Tensor> {
    let (b, h, w, c) = x.dims4()?;
    Ok(x.reshape((b, h / sh, sh, w / sw, sw, c))?
        .permute((0, 1, 3, 2, 4, 5))?
        .contiguous()?
        .reshape((b * (h / sh) * (w / sw), sh * sw, c))?)
}

/// Inverse of [`partition`].
fn merge(g: &Tensor, shape: (usize, usize, usize, usize), sh: usize, sw: usize) -> Result<Tensor> {
    let (b, h, w, c) = shape;
    Ok(g.reshape((b, h / sh, w / sw, sh, sw, c))?
        .permute((0, 1, 3, 2, 4, 5))?
        .contiguous()?
        .reshape((b, h, w, c))?)
}

/// Average-pool the `sh x sw` token grid of each group by `ph x pw`.
fn pool_tokens(g: &Tensor, sh: usize, sw: usize, ph: usize, pw: usize) -> Result<Tensor> {
    let (n, _, c) = g.dims3()?;
    let pooled = g
        .reshape((n, sh / ph, ph, sw / pw, pw, c))?
        .mean(4)?
        .mean(2)?;
    Ok(pooled.reshape((n, (sh / ph) * (sw / pw), c))?)
}

fn roll2(x: &Tensor, shift: i32) -> Result<Tensor> {
    Ok(x.roll(shift, 1)?.roll(shift, 2)?)
}

fn split_qkv(qkv: &Tensor, c: usize) -> Result<(Tensor, Tensor, Tensor)> {
    Ok((
        qkv.narrow(D::Minus1, 0, c)?,
        qkv.narrow(D::Minus1, c, c)?,
        qkv.narrow(D::Minus1, 2 * c, c)?,
    ))
}

/// Anchored stripe self-attention over one stripe pattern.
#[derive(Clone, Debug)]
struct Assa {
    qkv: Linear,
    anchor: Linear,
    proj: Linear,
    dim: usize,
    window: usize,
    downsample: usize,
}

impl Assa {
    fn new(scope: &mut Scope<'_>, cfg: &DefTransformerConfig) -> Result<Self> {
        let c = cfg.embed_dim;
        Ok(Self {
            qkv: Linear::new(&mut scope.pp("qkv"), c, 3 * c)?,
            anchor: Linear::new(&mut scope.pp("anchor"), c, c)?,
            proj: Linear::new(&mut scope.pp("proj"), c, c)?,
            dim: c,
            window: cfg.window,
            downsample: cfg.anchor_downsample,
        })
    }

    fn forward(
        &self,
        x: &Tensor,
        pattern: StripePattern,
        maps: &mut Option<&mut Vec<Tensor>>,
    ) -> Result<Tensor> {
        let shape = x.dims4()?;
        let (_, h, w, _) = shape;
        let half = (self.window / 2) as i32;
        let x = if pattern.shifted {
            roll2(x, -half)?
        } else {
            x.clone()
        };
        let (sh, sw) = match pattern.orientation {
            Orientation::Horizontal => (self.window, w),
            Orientation::Vertical => (h, self.window),
        };
        let g = partition(&x, sh, sw)?;
        let (q, k, v) = split_qkv(&self.qkv.forward(&g)?, self.dim)?;
        let pooled = pool_tokens(&g, sh, sw, self.downsample.min(sh), self.downsample.min(sw))?;
        let a = self.anchor.forward(&pooled)?;
        let out = anchored_attention(&q, &k, &v, &a, self.dim)?;
        if let Some(m) = maps.as_mut() {
            m.push(out.m_e.clone());
            m.push(out.m_d.clone());
        }
        let y = merge(&self.proj.forward(&out.y)?, shape, sh, sw)?;
        if pattern.shifted {
            roll2(&y, half)
        } else {
            Ok(y)
        }
    }
}

/// Scaled-cosine attention inside non-overlapping square windows.
#[derive(Clone, Debug)]
struct WindowAttention {
    qkv: Linear,
    proj: Linear,
    logit_scale: Tensor,
    bias_table: Tensor,
    bias_index: Tensor,
    dim: usize,
    window: usize,
}

/// γ is learned as `exp(-logit_scale)` and never drops below 0.01.
const MAX_LOGIT_SCALE: f64 = 4.605170185988092; // ln 100
const INIT_LOGIT_SCALE: f64 = std::f64::consts::LN_10;

fn relative_index(window: usize) -> Vec<u32> {
    let span = 2 * window - 1;
    let mut idx = Vec::with_capacity(window.pow(4));
    for i in 0..window * window {
        for j in 0..window * window {
            let dr = i / window + window - 1 - j / window;
            let dc = i % window + window - 1 - j % window;
            idx.push((dr * span + dc) as u32);
        }
    }
    idx
}

impl WindowAttention {
    fn new(scope: &mut Scope<'_>, cfg: &DefTransformerConfig) -> Result<Self> {
        let c = cfg.embed_dim;
        let w = cfg.window;
        Ok(Self {
            qkv: Linear::new(&mut scope.pp("qkv"), c, 3 * c)?,
            proj: Linear::new(&mut scope.pp("proj"), c, c)?,
            logit_scale: scope.constant("logit_scale", &[], INIT_LOGIT_SCALE)?,
            bias_table: scope.zeros("bias_table", &[(2 * w - 1) * (2 * w - 1)])?,
            bias_index: Tensor::from_vec(relative_index(w), w.pow(4), &Device::Cpu)?,
            dim: c,
            window: w,
        })
    }

    fn forward(&self, x: &Tensor, maps: &mut Option<&mut Vec<Tensor>>) -> Result<Tensor> {
        let shape = x.dims4()?;
        let n = self.window * self.window;
        let g = partition(x, self.window, self.window)?;
        let (q, k, v) = split_qkv(&self.qkv.forward(&g)?, self.dim)?;
        let inv_gamma = self.logit_scale.minimum(MAX_LOGIT_SCALE)?.exp()?;
        let bias = self
            .bias_table
            .index_select(&self.bias_index, 0)?
            .reshape((n, n))?;
        let (y, m) = cosine_window_attention(&q, &k, &v, &inv_gamma, Some(&bias))?;
        if let Some(maps) = maps.as_mut() {
            maps.push(m);
        }
        merge(&self.proj.forward(&y)?, shape, self.window, self.window)
    }
}

#[derive(Clone, Debug)]
struct FeedForward {
    fc1: Linear,
    fc2: Linear,
}

impl FeedForward {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.fc2.forward(&self.fc1.forward(x)?.gelu()?)
    }
}

/// Post-norm layer: `x + LN(ASSA(x) + WA(x))`, then `x + LN(FFN(x))`.
#[derive(Clone, Debug)]
pub struct TransformerLayer {
    pattern: StripePattern,
    assa: Assa,
    window: Option<WindowAttention>,
    norm1: LayerNorm,
    ffn: FeedForward,
    norm2: LayerNorm,
}

impl TransformerLayer {
    fn new(
        scope: &mut Scope<'_>,
        cfg: &DefTransformerConfig,
        pattern: StripePattern,
    ) -> Result<Self> {
        let c = cfg.embed_dim;
        Ok(Self {
            pattern,
            assa: Assa::new(&mut scope.pp("assa"), cfg)?,
            window: if cfg.window_attention {
                Some(WindowAttention::new(&mut scope.pp("win"), cfg)?)
            } else {
                None
            },
            norm1: LayerNorm::new(&mut scope.pp("norm1"), c)?,
            ffn: FeedForward {
                fc1: Linear::new(&mut scope.pp("ffn.fc1"), c, cfg.mlp_ratio * c)?,
                fc2: Linear::new(&mut scope.pp("ffn.fc2"), cfg.mlp_ratio * c, c)?,
            },
            norm2: LayerNorm::new(&mut scope.pp("norm2"), c)?,
        })
    }

    pub fn pattern(&self) -> StripePattern {
        self.pattern
    }

    /// `x`: tokens laid out `(B, H, W, C)`.
    pub fn forward(&self, x: &Tensor, maps: &mut Option<&mut Vec<Tensor>>) -> Result<Tensor> {
        let mut attn = self.assa.forward(x, self.pattern, maps)?;
        if let Some(w) = &self.window {
            attn = (attn + w.forward(x, maps)?)?;
        }
        let x = (x + self.norm1.forward(&attn)?)?;
        let y = self.norm2.forward(&self.ffn.forward(&x)?)?;
        Ok((x + y)?)
    }
}

/// Reflection indices that extend `0..n` to length `target`.
fn reflect_indices(n: usize, target: usize) -> Vec<u32> {
    let period = 2 * (n.max(1) - 1);
    (0..target)
        .map(|i| {
            if period == 0 {
                return 0;
            }
            let r = i % period;
            (if r < n { r } else { period - r }) as u32
        })
        .collect()
}

/// Purification network mapping a covariance tensor to its reconstruction.
#[derive(Clone, Debug)]
pub struct DefTransformer {
    config: DefTransformerConfig,
    params: ParamStore,
    conv_in: Conv2d,
    stages: Vec<Vec<TransformerLayer>>,
    conv_body: Conv2d,
    conv_out: Conv2d,
    pad_index: Option<Tensor>,
    dtype: DType,
}

impl DefTransformer {
    pub fn new(config: DefTransformerConfig, dtype: DType, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut init = Init::new(seed, dtype);
        let mut root = init.root();
        let c = config.embed_dim;
        let conv_in = Conv2d::new(
            &mut root.pp("conv_in"),
            crate::array::tensor::CHANNELS,
            c,
            3,
            1,
        )?;
        let mut stages = Vec::with_capacity(config.stages);
        for s in 0..config.stages {
            let mut layers = Vec::with_capacity(config.layers_per_stage);
            for l in 0..config.layers_per_stage {
                let mut scope = root.pp(&format!("stage{s}.layer{l}"));
                layers.push(TransformerLayer::new(
                    &mut scope,
                    &config,
                    StripePattern::for_layer(l),
                )?);
            }
            stages.push(layers);
        }
        let conv_body = Conv2d::new(&mut root.pp("conv_body"), c, c, 3, 1)?;
        let conv_out = Conv2d::new(
            &mut root.pp("conv_out"),
            c,
            crate::array::tensor::CHANNELS,
            3,
            1,
        )?;
        let side = config.padded_side();
        let pad_index = (side != config.elements)
            .then(|| Tensor::from_vec(reflect_indices(config.elements, side), side, &Device::Cpu))
            .transpose()?;
        Ok(Self {
            config,
            params: init.finish(),
            conv_in,
            stages,
            conv_body,
            conv_out,
            pad_index,
            dtype,
        })
    }

    pub fn config(&self) -> &DefTransformerConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn layers(&self) -> impl Iterator<Item = &TransformerLayer> {
        self.stages.iter().flatten()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let m = self.config.elements;
        match x.dims() {
            [_, 3, h, w] if *h == m && *w == m => Ok(()),
            dims => Err(domain(format!(
                "def_transformer expects (B, 3, {m}, {m}), got {dims:?}"
            ))),
        }
    }

    /// Reflect-pad to a window multiple and lift to `embed_dim` channels.
    pub fn feature_extract(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let x = match &self.pad_index {
            Some(idx) => x.index_select(idx, 2)?.index_select(idx, 3)?,
            None => x.clone(),
        };
        self.conv_in.forward(&x)
    }

    fn run(&self, x: &Tensor, mut maps: Option<&mut Vec<Tensor>>) -> Result<Tensor> {
        let feat = self.feature_extract(x)?;
        let mut h = feat.permute((0, 2, 3, 1))?.contiguous()?;
        for layer in self.layers() {
            h = layer.forward(&h, &mut maps)?;
        }
        let h = h.permute((0, 3, 1, 2))?.contiguous()?;
        let h = (self.conv_body.forward(&h)? + feat)?;
        let out = self.conv_out.forward(&h)?;
        let m = self.config.elements;
        Ok(out.narrow(2, 0, m)?.narrow(3, 0, m)?)
    }

    /// `(B, 3, M, M)` to `(B, 3, M, M)`.
    pub fn reconstruct(&self, x: &Tensor) -> Result<Tensor> {
        self.run(x, None)
    }

    /// Every attention map produced during one forward pass.
    pub fn attention_maps(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let mut maps = Vec::new();
        self.run(x, Some(&mut maps))?;
        Ok(maps)
    }

    pub fn batch(&self, inputs: &[&[f64]]) -> Result<Tensor> {
        batch_tensor(inputs, self.config.elements, self.dtype)
    }

    /// Reconstruct flat inputs in chunks.
    pub fn reconstruct_flat(&self, inputs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(128) {
            out.extend(nn::items_f64(&self.reconstruct(&self.batch(chunk)?)?)?);
        }
        Ok(out)
    }

    pub fn purify(&self, inputs: &[&CovarianceTensor]) -> Result<Vec<CovarianceTensor>> {
        let flat: Vec<&[f64]> = inputs.iter().map(|t| t.as_slice()).collect();
        self.reconstruct_flat(&flat)?
            .into_iter()
            .map(|v| CovarianceTensor::from_vec(self.config.elements, v))
            .collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        nn::save_checkpoint(dir, CHECKPOINT_KIND, &self.params, &self.config)
    }

    pub fn load(dir: &Path, dtype: DType) -> Result<Self> {
        let cfg: DefTransformerConfig = nn::read_checkpoint_config(dir, CHECKPOINT_KIND)?;
        let model = Self::new(cfg, dtype, 0)?;
        nn::load_into(dir, &model.params)?;
        Ok(model)
    }
}
