//! Minimal layers built from differentiable candle primitives.

use candle_core::{Tensor, D};

use super::params::Scope;
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct Linear {
    weight: Tensor,
    bias: Tensor,
}

impl Linear {
    pub fn new(scope: &mut Scope<'_>, in_dim: usize, out_dim: usize) -> Result<Self> {
        let bound = 1.0 / (in_dim as f64).sqrt();
        Ok(Self {
            weight: scope.uniform("weight", &[out_dim, in_dim], bound)?,
            bias: scope.uniform("bias", &[out_dim], bound)?,
        })
    }

    /// Applies to the last dimension of `x`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.broadcast_matmul(&self.weight.t()?)?;
        Ok(y.broadcast_add(&self.bias)?)
    }
}

/// Stride-1 square convolution with symmetric zero padding.
#[derive(Clone, Debug)]
pub struct Conv2d {
    weight: Tensor,
    bias: Tensor,
    padding: usize,
}

impl Conv2d {
    pub fn new(
        scope: &mut Scope<'_>,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        padding: usize,
    ) -> Result<Self> {
        let bound = 1.0 / ((in_ch * kernel * kernel) as f64).sqrt();
        Ok(Self {
            weight: scope.uniform("weight", &[out_ch, in_ch, kernel, kernel], bound)?,
            bias: scope.uniform("bias", &[out_ch], bound)?,
            padding,
        })
    }

    /// `x`: `(B, C, H, W)`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.conv2d(&self.weight, self.padding, 1, 1, 1)?;
        let out_ch = self.bias.dim(0)?;
        Ok(y.broadcast_add(&self.bias.reshape((1, out_ch, 1, 1))?)?)
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    gamma: Tensor,
    beta: Tensor,
    eps: f64,
}

impl LayerNorm {
    pub fn new(scope: &mut Scope<'_>, dim: usize) -> Result<Self> {
        Ok(Self {
            gamma: scope.constant("gamma", &[dim], 1.0)?,
            beta: scope.zeros("beta", &[dim])?,
            eps: 1e-5,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mean = x.mean_keepdim(D::Minus1)?;
        let centered = x.broadcast_sub(&mean)?;
        let var = centered.sqr()?.mean_keepdim(D::Minus1)?;
        let normed = centered.broadcast_div(&(var + self.eps)?.sqrt()?)?;
        Ok(normed
            .broadcast_mul(&self.gamma)?
            .broadcast_add(&self.beta)?)
    }
}

/// Numerically stable softmax over the last dimension.
pub fn softmax_last_dim(x: &Tensor) -> Result<Tensor> {
    let max = x.max_keepdim(D::Minus1)?.detach();
    let e = x.broadcast_sub(&max)?.exp()?;
    let s = e.sum_keepdim(D::Minus1)?;
    Ok(e.broadcast_div(&s)?)
}

/// `log(softmax(x))` over the last dimension.
pub fn log_softmax_last_dim(x: &Tensor) -> Result<Tensor> {
    let max = x.max_keepdim(D::Minus1)?.detach();
    let shifted = x.broadcast_sub(&max)?;
    let lse = shifted.exp()?.sum_keepdim(D::Minus1)?.log()?;
    Ok(shifted.broadcast_sub(&lse)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Init;
    use candle_core::{DType, Device};

    #[test]
    fn softmax_rows_sum_to_one() {
        let x = Tensor::new(&[[1.0f64, 2.0, 3.0], [-50.0, 0.0, 50.0]], &Device::Cpu).unwrap();
        let s = softmax_last_dim(&x)
            .unwrap()
            .sum(1)
            .unwrap()
            .to_vec1::<f64>()
            .unwrap();
        for v in s {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let ls = log_softmax_last_dim(&x).unwrap().exp().unwrap();
        let sm = softmax_last_dim(&x).unwrap();
        let diff = (ls - sm)
            .unwrap()
            .abs()
            .unwrap()
            .max_all()
            .unwrap()
            .to_scalar::<f64>()
            .unwrap();
        assert!(diff < 1e-12);
    }

    #[test]
    fn layer_norm_normalises() {
        let mut init = Init::new(0, DType::F64);
        let ln = LayerNorm::new(&mut init.root().pp("ln"), 4).unwrap();
        let x = Tensor::new(&[[1.0f64, 2.0, 3.0, 10.0]], &Device::Cpu).unwrap();
        let y = ln.forward(&x).unwrap();
        let mean = y.mean_all().unwrap().to_scalar::<f64>().unwrap();
        let var = y
            .sqr()
            .unwrap()
            .mean_all()
            .unwrap()
            .to_scalar::<f64>()
            .unwrap();
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-4);
    }

    #[test]
    fn init_is_seeded() {
        let build = |seed| {
            let mut init = Init::new(seed, DType::F32);
            let l = Linear::new(&mut init.root().pp("fc"), 3, 2).unwrap();
            (
                l.weight.flatten_all().unwrap().to_vec1::<f32>().unwrap(),
                init.finish(),
            )
        };
        let (a, store) = build(1);
        let (b, _) = build(1);
        let (c, _) = build(2);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(store.len(), 2);
        assert!(store.get("fc.weight").is_some());
        assert_eq!(store.num_params(), 8);
    }
}
