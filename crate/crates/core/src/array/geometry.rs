use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Element positions of a linear array, in units of half a wavelength.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry", into = "RawGeometry")]
pub struct ArrayGeometry {
    positions: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawGeometry {
    positions: Vec<f64>,
}

impl TryFrom<RawGeometry> for ArrayGeometry {
    type Error = crate::Error;

    fn try_from(raw: RawGeometry) -> Result<Self> {
        ArrayGeometry::new(raw.positions)
    }
}

impl From<ArrayGeometry> for RawGeometry {
    fn from(g: ArrayGeometry) -> Self {
        RawGeometry {
            positions: g.positions,
        }
    }
}

impl ArrayGeometry {
    /// Positions must start at 0 and be strictly increasing.
    pub fn new(positions: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(domain("array needs at least one element"));
        }
        if positions[0] != 0.0 {
            return Err(domain("first element position must be 0"));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(domain("element positions must be finite"));
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain("element positions must be strictly increasing"));
        }
        Ok(Self { positions })
    }

    /// Uniform linear array with half-wavelength spacing.
    pub fn ula(elements: usize) -> Self {
        assert!(elements > 0, "ULA needs at least one element");
        Self {
            positions: (0..elements).map(|m| m as f64).collect(),
        }
    }

    /// The 8-element sparse array `[0, 1, 2, 5, 6, 9, 10, 11]`.
    pub fn sparse8() -> Self {
        Self {
            positions: vec![0.0, 1.0, 2.0, 5.0, 6.0, 9.0, 10.0, 11.0],
        }
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn element_count(&self) -> usize {
        self.positions.len()
    }

    /// True when positions are exactly `0, 1, …, M-1`.
    pub fn is_uniform(&self) -> bool {
        self.positions
            .iter()
            .enumerate()
            .all(|(m, &p)| p == m as f64)
    }

    pub fn label(&self) -> String {
        if self.is_uniform() {
            format!("ULA{}", self.element_count())
        } else {
            let pos: Vec<String> = self.positions.iter().map(|p| format!("{p}")).collect();
            format!("SLA[{}]", pos.join(" "))
        }
    }
}

fn check_angle(theta_deg: f64) -> Result<()> {
    if !(-90.0..=90.0).contains(&theta_deg) {
        return Err(domain(format!("angle {theta_deg} deg outside [-90, 90]")));
    }
    Ok(())
}

/// Array response `exp(-j*pi*p_m*sin(theta))` to a unit plane wave.
pub fn steering_vector(theta_deg: f64, geometry: &ArrayGeometry) -> Result<DVector<Complex64>> {
    check_angle(theta_deg)?;
    let phase = PI * theta_deg.to_radians().sin();
    Ok(DVector::from_iterator(
        geometry.element_count(),
        geometry
            .positions()
            .iter()
            .map(|&p| Complex64::from_polar(1.0, -phase * p)),
    ))
}

/// Columns are the steering vectors of `angles_deg`.
pub fn steering_matrix(angles_deg: &[f64], geometry: &ArrayGeometry) -> Result<DMatrix<Complex64>> {
    if angles_deg.is_empty() {
        return Err(domain("steering matrix needs at least one angle"));
    }
    let cols = angles_deg
        .iter()
        .map(|&a| steering_vector(a, geometry))
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_columns(&cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn broadside_is_all_ones() {
        for g in [
            ArrayGeometry::ula(8),
            ArrayGeometry::sparse8(),
            ArrayGeometry::ula(1),
        ] {
            let a = steering_vector(0.0, &g).unwrap();
            assert!(a.iter().all(|z| *z == Complex64::new(1.0, 0.0)));
        }
    }

    #[test]
    fn thirty_degrees_hand_values() {
        let a = steering_vector(30.0, &ArrayGeometry::ula(2)).unwrap();
        assert_abs_diff_eq!(a[0].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a[1].re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a[1].im, -1.0, epsilon = 1e-12);

        let sla = ArrayGeometry::new(vec![0.0, 2.0]).unwrap();
        let a = steering_vector(30.0, &sla).unwrap();
        assert_abs_diff_eq!(a[1].re, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a[1].im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_out_of_range_angle() {
        assert!(steering_vector(90.5, &ArrayGeometry::ula(4)).is_err());
        assert!(steering_vector(-91.0, &ArrayGeometry::ula(4)).is_err());
        assert!(steering_vector(90.0, &ArrayGeometry::ula(4)).is_ok());
    }

    #[test]
    fn steering_matrix_columns() {
        let g = ArrayGeometry::ula(8);
        assert!(steering_matrix(&[], &g).is_err());
        let a = steering_matrix(&[-10.0, 20.0], &g).unwrap();
        assert_eq!(a.shape(), (8, 2));
        let c0 = steering_vector(-10.0, &g).unwrap();
        let c1 = steering_vector(20.0, &g).unwrap();
        for m in 0..8 {
            assert_eq!(a[(m, 0)], c0[m]);
            assert_eq!(a[(m, 1)], c1[m]);
        }
        let dup = steering_matrix(&[0.0, 0.0], &g).unwrap();
        assert_eq!(dup.column(0), dup.column(1));
        let single = steering_matrix(&[12.5], &g).unwrap();
        assert_eq!(
            single.column(0),
            steering_vector(12.5, &g).unwrap().column(0)
        );
    }

    #[test]
    fn geometry_validation() {
        assert!(ArrayGeometry::new(vec![]).is_err());
        assert!(ArrayGeometry::new(vec![1.0, 2.0]).is_err());
        assert!(ArrayGeometry::new(vec![0.0, 2.0, 2.0]).is_err());
        assert!(ArrayGeometry::ula(8).is_uniform());
        assert!(!ArrayGeometry::sparse8().is_uniform());
        let json = serde_json::to_string(&ArrayGeometry::sparse8()).unwrap();
        let back: ArrayGeometry = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ArrayGeometry::sparse8());
        assert!(serde_json::from_str::<ArrayGeometry>(r#"{"positions":[0,3,1]}"#).is_err());
    }

    proptest::proptest! {
        #[test]
        fn negating_angle_conjugates(theta in -90.0f64..=90.0) {
            let g = ArrayGeometry::sparse8();
            let a = steering_vector(theta, &g).unwrap();
            let b = steering_vector(-theta, &g).unwrap();
            for (x, y) in a.iter().zip(b.iter()) {
                proptest::prop_assert!((x.conj() - y).norm() < 1e-12);
            }
        }
    }
}
