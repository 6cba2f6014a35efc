//! Shared neural-network plumbing on top of candle.

mod checkpoint;
mod layers;
mod params;

use candle_core::{DType, Device, Tensor};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};

pub use checkpoint::{
    load_into, read_checkpoint_config, save_checkpoint, CheckpointIndex, TensorEntry,
};
pub use layers::{log_softmax_last_dim, softmax_last_dim, Conv2d, LayerNorm, Linear};
pub use params::{Init, ParamStore, Scope};

use crate::array::tensor::CHANNELS;
use crate::error::{domain, Result};

/// Stack flat `3*M*M` inputs into a `(B, 3, M, M)` tensor.
pub fn batch_tensor(inputs: &[&[f64]], elements: usize, dtype: DType) -> Result<Tensor> {
    let record = CHANNELS * elements * elements;
    let mut flat = Vec::with_capacity(inputs.len() * record);
    for x in inputs {
        if x.len() != record {
            return Err(domain(format!(
                "input of {} values does not match 3x{elements}x{elements}",
                x.len()
            )));
        }
        flat.extend_from_slice(x);
    }
    let t = Tensor::from_vec(
        flat,
        (inputs.len(), CHANNELS, elements, elements),
        &Device::Cpu,
    )?;
    Ok(t.to_dtype(dtype)?)
}

/// Rows of a 2-d tensor as `f64` vectors.
pub fn rows_f64(t: &Tensor) -> Result<Vec<Vec<f64>>> {
    Ok(t.to_dtype(DType::F64)?.to_vec2::<f64>()?)
}

/// Flatten each batch item of a tensor into an `f64` vector.
pub fn items_f64(t: &Tensor) -> Result<Vec<Vec<f64>>> {
    let b = t.dim(0)?;
    Ok(t.to_dtype(DType::F64)?.reshape((b, ()))?.to_vec2::<f64>()?)
}

/// Plain Adam (AdamW with zero weight decay).
pub fn adam(store: &ParamStore, lr: f64) -> Result<AdamW> {
    Ok(AdamW::new(
        store.vars(),
        ParamsAdamW {
            lr,
            weight_decay: 0.0,
            ..Default::default()
        },
    )?)
}
