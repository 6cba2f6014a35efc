//! Attention kernels on grouped token tensors `(G, n, d)`.

use candle_core::{Tensor, D};

use crate::error::{domain, Result};
use crate::nn::softmax_last_dim;

/// Output of an anchored attention call together with both maps.
#[derive(Clone, Debug)]
pub struct AnchoredOutput {
    pub y: Tensor,
    /// `softmax(Q Aᵀ / √d)`, `(G, n, a)`.
    pub m_e: Tensor,
    /// `softmax(A Kᵀ / √d)`, `(G, a, n)`.
    pub m_d: Tensor,
}

/// `Y = softmax(Q Aᵀ/√d) · (softmax(A Kᵀ/√d) · V)`.
///
/// Attention flows from tokens to anchors and back, so the cost is linear in
/// the token count for a fixed anchor count.
pub fn anchored_attention(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    a: &Tensor,
    d: usize,
) -> Result<AnchoredOutput> {
    if a.dim(D::Minus2)? == 0 {
        return Err(domain("anchored attention needs at least one anchor"));
    }
    let scale = 1.0 / (d as f64).sqrt();
    let m_d =
        softmax_last_dim(&(a.matmul(&k.transpose(D::Minus2, D::Minus1)?.contiguous()?)? * scale)?)?;
    let m_e =
        softmax_last_dim(&(q.matmul(&a.transpose(D::Minus2, D::Minus1)?.contiguous()?)? * scale)?)?;
    let y = m_e.matmul(&m_d.matmul(&v.contiguous()?)?)?;
    Ok(AnchoredOutput { y, m_e, m_d })
}

/// Rows scaled to unit ℓ2 norm; zero rows stay zero.
fn normalize_rows(x: &Tensor) -> Result<Tensor> {
    let norm = x.sqr()?.sum_keepdim(D::Minus1)?.sqrt()?.maximum(1e-12)?;
    Ok(x.broadcast_div(&norm)?)
}

/// `softmax(cos(Q, K)/γ + υ) · V`.
///
/// `inv_gamma` is a scalar tensor holding `1/γ`; `bias`, when given, is an
/// `(n, n)` additive score bias shared across groups. Returns the output and
/// the attention map.
pub fn cosine_window_attention(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    inv_gamma: &Tensor,
    bias: Option<&Tensor>,
) -> Result<(Tensor, Tensor)> {
    let qn = normalize_rows(q)?;
    let kn = normalize_rows(k)?;
    let cos = qn.matmul(&kn.transpose(D::Minus2, D::Minus1)?.contiguous()?)?;
    let mut scores = cos.broadcast_mul(inv_gamma)?;
    if let Some(b) = bias {
        scores = scores.broadcast_add(b)?;
    }
    let m = softmax_last_dim(&scores)?;
    Ok((m.matmul(&v.contiguous()?)?, m))
}
