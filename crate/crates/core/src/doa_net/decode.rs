use super::grid::DoaGrid;
use crate::error::{domain, Result};

/// Indices of the `l` largest values, sorted ascending by index. Equal
/// values favour the lower index.
pub fn top_indices(values: &[f64], l: usize) -> Result<Vec<usize>> {
    if l == 0 || l > values.len() {
        return Err(domain(format!(
            "cannot pick {l} peaks from {} logits",
            values.len()
        )));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    // Stable sort keeps lower indices first among ties.
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut top = order[..l].to_vec();
    top.sort_unstable();
    Ok(top)
}

/// Class-centre angles of the `l` strongest logits, ascending.
pub fn decode_angles(logits: &[f64], grid: &DoaGrid, l: usize) -> Result<Vec<f64>> {
    if logits.len() != grid.len() {
        return Err(domain(format!(
            "logit length {} does not match grid size {}",
            logits.len(),
            grid.len()
        )));
    }
    Ok(top_indices(logits, l)?
        .into_iter()
        .map(|i| grid.angle(i))
        .collect())
}

/// `100 * max softmax(logits)`.
pub fn conf_single(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = logits.iter().map(|&z| (z - max).exp()).sum();
    100.0 / denom
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `100 * mean` of the two largest sigmoid probabilities.
pub fn conf_dual(logits: &[f64]) -> Result<f64> {
    let top = top_indices(logits, 2)?;
    Ok(50.0 * (sigmoid(logits[top[0]]) + sigmoid(logits[top[1]])))
}
