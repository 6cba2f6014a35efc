use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{domain, Result};

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Per-source absolute errors after sorting both sides.
pub fn paired_errors(pred: &[f64], truth: &[f64]) -> Result<Vec<f64>> {
    if pred.len() != truth.len() {
        return Err(domain(format!(
            "prediction has {} sources, truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    Ok(sorted(pred)
        .iter()
        .zip(sorted(truth))
        .map(|(p, t)| (p - t).abs())
        .collect())
}

fn check_batch(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<()> {
    if pred.is_empty() {
        return Err(domain("metric over an empty batch"));
    }
    if pred.len() != truth.len() {
        return Err(domain("prediction and truth batch sizes differ"));
    }
    Ok(())
}

/// `sqrt(mean over samples and sources of squared angle error)`.
pub fn rmse(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    check_batch(pred, truth)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, t) in pred.iter().zip(truth) {
        for e in paired_errors(p, t)? {
            sum += e * e;
            n += 1;
        }
    }
    Ok((sum / n as f64).sqrt())
}

/// Whether every source of one sample lies within `zeta` degrees.
pub fn within_tolerance(pred: &[f64], truth: &[f64], zeta: f64) -> Result<bool> {
    Ok(paired_errors(pred, truth)?.iter().all(|&e| e <= zeta))
}

/// Percentage of samples whose every source error is at most `zeta`.
pub fn accuracy(pred: &[Vec<f64>], truth: &[Vec<f64>], zeta: f64) -> Result<f64> {
    check_batch(pred, truth)?;
    if !(zeta > 0.0) {
        return Err(domain("accuracy threshold must be positive"));
    }
    let mut hits = 0usize;
    for (p, t) in pred.iter().zip(truth) {
        hits += within_tolerance(p, t, zeta)? as usize;
    }
    Ok(100.0 * hits as f64 / pred.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Unequal-variance two-sample t-test with Welch–Satterthwaite degrees of
/// freedom.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(domain(
            "Welch's test needs at least two observations per sample",
        ));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        return Ok(if ma == mb {
            WelchResult {
                t: 0.0,
                df: f64::INFINITY,
                p: 1.0,
            }
        } else {
            WelchResult {
                t: (ma - mb).signum() * f64::INFINITY,
                df: f64::INFINITY,
                p: 0.0,
            }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| domain(format!("t distribution: {e}")))?;
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(WelchResult { t, df, p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn col(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&col(&[1.0, 2.0]), &col(&[1.0, 2.0])).unwrap(), 0.0);
        assert_eq!(rmse(&col(&[13.0]), &col(&[10.0])).unwrap(), 3.0);
        assert!(
            (rmse(&col(&[3.0, -4.0]), &col(&[0.0, 0.0])).unwrap() - 12.5f64.sqrt()).abs() < 1e-12
        );
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[vec![1.0, 2.0]], &[vec![1.0]]).is_err());
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&col(&[5.0]), &col(&[5.0]), 2.0).unwrap(), 100.0);
        assert_eq!(accuracy(&col(&[12.0]), &col(&[10.0]), 2.0).unwrap(), 100.0);
        assert_eq!(
            accuracy(&col(&[1.0, 3.0]), &col(&[0.0, 0.0]), 2.0).unwrap(),
            50.0
        );
        assert!(accuracy(&[], &[], 2.0).is_err());
    }

    #[test]
    fn welch_examples() {
        let r = welch_t_test(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
        let r = welch_t_test(&[0.0; 5], &[10.0, 10.0, 10.0, 10.0, 11.0]).unwrap();
        assert!(r.p < 0.001);
        // Textbook: s_b² = 0.2, se = 0.2, t = -51, df = 4.
        assert!((r.t + 51.0).abs() < 1e-9 && (r.df - 4.0).abs() < 1e-9);
        let r = welch_t_test(&[2.0, 2.0], &[2.0, 2.0]).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn identity_and_permutation(rows in prop::collection::vec(prop::collection::vec(-90.0f64..90.0, 2), 1..20), zeta in 0.01f64..10.0) {
            prop_assert_eq!(rmse(&rows, &rows).unwrap(), 0.0);
            prop_assert_eq!(accuracy(&rows, &rows, zeta).unwrap(), 100.0);
            let shifted: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x + 1.0).collect()).collect();
            let base = rmse(&shifted, &rows).unwrap();
            let mut rev_p = shifted.clone();
            let mut rev_t = rows.clone();
            rev_p.reverse();
            rev_t.reverse();
            prop_assert!((rmse(&rev_p, &rev_t).unwrap() - base).abs() < 1e-12);
            let swapped_p: Vec<Vec<f64>> = shifted.iter().map(|r| vec![r[1], r[0]]).collect();
            let swapped_t: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[1], r[0]]).collect();
            prop_assert!((rmse(&swapped_p, &swapped_t).unwrap() - base).abs() < 1e-12);
        }

        #[test]
        fn welch_symmetry(a in prop::collection::vec(-5.0f64..5.0, 2..15), b in prop::collection::vec(-5.0f64..5.0, 2..15)) {
            let x = welch_t_test(&a, &b).unwrap();
            let y = welch_t_test(&b, &a).unwrap();
            prop_assert!((x.t + y.t).abs() < 1e-9 || (x.t.is_infinite() && y.t == -x.t));
            prop_assert!((x.p - y.p).abs() < 1e-12);
        }
    }
}
