//! Attention cost formulas, evaluated exactly in integer arithmetic.

use crate::error::{domain, Result};

/// `(3 + 2/S²)·η·C² + (1 + 2/S²)·η²·C` for anchored stripe attention over
/// `η` tokens of width `C`.
pub fn assa_flop_estimate(eta: u64, channels: u64, downsample: u64) -> Result<f64> {
    if downsample < 1 {
        return Err(domain("downsampling factor S must be at least 1"));
    }
    let (eta, c, s2) = (eta as u128, channels as u128, (downsample as u128).pow(2));
    let numerator = (3 * s2 + 2) * eta * c * c + (s2 + 2) * eta * eta * c;
    Ok(if numerator % s2 == 0 {
        (numerator / s2) as f64
    } else {
        numerator as f64 / s2 as f64
    })
}

/// `4·η·C² + 2·η²·C` for global self-attention.
pub fn global_flop_estimate(eta: u64, channels: u64) -> f64 {
    let (eta, c) = (eta as u128, channels as u128);
    (4 * eta * c * c + 2 * eta * eta * c) as f64
}
