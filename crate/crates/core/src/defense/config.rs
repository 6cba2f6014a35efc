use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReconstructionNorm {
    #[serde(rename = "l1")]
    L1,
    #[serde(rename = "mse")]
    Mse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefTransformerConfig {
    /// Array size M; inputs are `3 x M x M`.
    pub elements: usize,
    pub embed_dim: usize,
    pub stages: usize,
    pub layers_per_stage: usize,
    /// Side of the square attention window; also the stripe width.
    pub window: usize,
    /// Anchor pooling factor S.
    pub anchor_downsample: usize,
    /// Hidden width of the feed-forward block as a multiple of `embed_dim`.
    pub mlp_ratio: usize,
    /// Weight α on the clean reconstruction term.
    pub loss_weight: f64,
    pub reconstruction_norm: ReconstructionNorm,
    /// Run the cosine window-attention branch next to ASSA. Disabling it
    /// gives the stripe-attention-only variant.
    #[serde(default = "default_true")]
    pub window_attention: bool,
}

fn default_true() -> bool {
    true
}

impl DefTransformerConfig {
    /// Full-size network: dim 64, 4 stages of 4 layers, 8x8 windows, S = 2,
    /// α = 0.25, ℓ1 reconstruction.
    pub fn full(elements: usize) -> Self {
        Self {
            elements,
            embed_dim: 64,
            stages: 4,
            layers_per_stage: 4,
            window: 8,
            anchor_downsample: 2,
            mlp_ratio: 2,
            loss_weight: 0.25,
            reconstruction_norm: ReconstructionNorm::L1,
            window_attention: true,
        }
    }

    /// Reduced width and depth for CPU training runs.
    pub fn desk(elements: usize) -> Self {
        Self {
            embed_dim: 32,
            stages: 2,
            layers_per_stage: 4,
            ..Self::full(elements)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements == 0
            || self.embed_dim == 0
            || self.stages == 0
            || self.layers_per_stage == 0
        {
            return Err(config("def_transformer sizes must be positive"));
        }
        if self.window == 0 || self.mlp_ratio == 0 {
            return Err(config("window and mlp_ratio must be positive"));
        }
        if self.anchor_downsample < 2 {
            return Err(config("anchor_downsample S must be at least 2"));
        }
        let pool = self.anchor_downsample.min(self.window);
        if self.window % pool != 0 {
            return Err(config(format!(
                "anchor_downsample {} does not tile the {}-wide stripes",
                self.anchor_downsample, self.window
            )));
        }
        if !(self.loss_weight >= 0.0) {
            return Err(config("loss_weight must be non-negative"));
        }
        Ok(())
    }

    /// Feature-map side after reflect padding to a window multiple.
    pub fn padded_side(&self) -> usize {
        self.elements.div_ceil(self.window) * self.window
    }
}
