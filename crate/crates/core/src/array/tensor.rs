use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{domain, Result};

/// Real `3 x M x M` encoding of a covariance matrix, laid out channel-major:
/// channel 0 is the real part, 1 the imaginary part, 2 the principal-value
/// phase. The whole tensor is scaled to unit mean squared magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceTensor {
    elements: usize,
    data: Vec<f64>,
}

pub const CHANNELS: usize = 3;

impl CovarianceTensor {
    pub fn from_vec(elements: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != CHANNELS * elements * elements {
            return Err(domain(format!(
                "tensor of {} values does not match 3x{elements}x{elements}",
                data.len()
            )));
        }
        Ok(Self { elements, data })
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn shape(&self) -> [usize; 3] {
        [CHANNELS, self.elements, self.elements]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        let m = self.elements;
        self.data[channel * m * m + row * m + col]
    }

    /// Mean squared value over all entries.
    pub fn power(&self) -> f64 {
        mean_power(&self.data)
    }

    /// Complex matrix rebuilt from the real and imaginary channels.
    pub fn to_complex(&self) -> DMatrix<Complex64> {
        let m = self.elements;
        DMatrix::from_fn(m, m, |i, j| {
            Complex64::new(self.get(0, i, j), self.get(1, i, j))
        })
    }
}

pub(crate) fn mean_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Encode `[Re R, Im R, arg R]` and normalise the tensor to unit power.
pub fn encode_covariance_tensor(r: &DMatrix<Complex64>) -> Result<CovarianceTensor> {
    let (rows, cols) = r.shape();
    if rows != cols {
        return Err(domain(format!(
            "covariance must be square, got {rows}x{cols}"
        )));
    }
    let m = rows;
    let mut data = vec![0.0; CHANNELS * m * m];
    for i in 0..m {
        for j in 0..m {
            let z = r[(i, j)];
            data[i * m + j] = z.re;
            data[m * m + i * m + j] = z.im;
            data[2 * m * m + i * m + j] = z.im.atan2(z.re);
        }
    }
    let p = mean_power(&data);
    if p > 0.0 {
        let scale = p.sqrt();
        data.iter_mut().for_each(|v| *v /= scale);
    }
    CovarianceTensor::from_vec(m, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{
        collect_snapshots, sample_covariance, ArrayGeometry, Modulation, SourceScenario,
    };

    #[test]
    fn identity_encodes_to_scaled_identity() {
        let t = encode_covariance_tensor(&DMatrix::identity(8, 8)).unwrap();
        assert_eq!(t.shape(), [3, 8, 8]);
        let d = t.get(0, 0, 0);
        assert!(d > 0.0);
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(t.get(0, i, j), if i == j { d } else { 0.0 });
                assert_eq!(t.get(1, i, j), 0.0);
                assert_eq!(t.get(2, i, j), 0.0);
            }
        }
        assert!((t.power() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn imaginary_channel_of_hand_covariance() {
        // R = [[1, -j], [j, 1]]; raw channels: re = I, im = [[0,-1],[1,0]],
        // phase = [[0,-pi/2],[pi/2,0]]
        let r = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(1.0, 0.0),
            ],
        );
        let half_pi = std::f64::consts::FRAC_PI_2;
        let power = (2.0 + 2.0 + 2.0 * half_pi * half_pi) / 12.0;
        let s = 1.0 / power.sqrt();
        let t = encode_covariance_tensor(&r).unwrap();
        assert!((t.get(1, 1, 0) - s).abs() < 1e-12);
        assert!((t.get(1, 0, 1) + s).abs() < 1e-12);
        assert!((t.get(2, 1, 0) - half_pi * s).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_square() {
        assert!(encode_covariance_tensor(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn channel_symmetry_and_power() {
        let sc = SourceScenario::new(vec![-7.0, 41.0], Modulation::Qam64, 3.0, 256).unwrap();
        let x = collect_snapshots(&sc, &ArrayGeometry::ula(8), 5).unwrap();
        let t = encode_covariance_tensor(&sample_covariance(&x).unwrap()).unwrap();
        assert!((t.power() - 1.0).abs() < 1e-6);
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(t.get(0, i, j), t.get(0, j, i));
                assert_eq!(t.get(1, i, j), -t.get(1, j, i));
            }
        }
        let back = t.to_complex();
        assert_eq!(back, back.adjoint());
    }
}
