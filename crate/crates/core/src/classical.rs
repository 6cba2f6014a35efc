//! Least-squares ESPRIT for uniform linear arrays.

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::ArrayGeometry;
use crate::error::{domain, Error, Result};

/// Signal eigenvalues below this fraction of the largest are treated as a
/// collapsed subspace.
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EspritEstimate {
    /// Ascending.
    pub angles_deg: Vec<f64>,
    /// Covariance eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// `λ_L / λ_{L+1}`; large values mean a well separated signal subspace.
    pub eigengap: f64,
}

/// Estimate `num_sources` angles from a covariance matrix of a ULA with
/// half-wavelength spacing, using maximally overlapping subarrays.
pub fn esprit_estimate(
    r: &DMatrix<Complex64>,
    num_sources: usize,
    geometry: &ArrayGeometry,
) -> Result<EspritEstimate> {
    if !geometry.is_uniform() {
        return Err(Error::UnsupportedGeometry(format!(
            "ESPRIT needs a shift-invariant ULA, got {}",
            geometry.label()
        )));
    }
    let m = geometry.element_count();
    if r.nrows() != m || r.ncols() != m {
        return Err(domain(format!(
            "covariance is {}x{}, array has {m} elements",
            r.nrows(),
            r.ncols()
        )));
    }
    if num_sources == 0 || num_sources >= m {
        return Err(domain(format!(
            "ESPRIT needs 1 <= L < M, got L = {num_sources}, M = {m}"
        )));
    }
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(domain("covariance has non-finite entries"));
    }

    let hermitian = (r + r.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(hermitian);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let lead = eigenvalues[0].abs().max(f64::MIN_POSITIVE);
    let weakest = eigenvalues[num_sources - 1];
    let eigengap = weakest / eigenvalues[num_sources].abs().max(f64::MIN_POSITIVE);
    if weakest <= RANK_TOL * lead {
        return Err(Error::Estimation(format!(
            "signal subspace is rank deficient: eigenvalues {eigenvalues:?}"
        )));
    }

    let es = DMatrix::from_fn(m, num_sources, |row, col| {
        eig.eigenvectors[(row, order[col])]
    });
    let e1 = es.rows(0, m - 1).into_owned();
    let e2 = es.rows(1, m - 1).into_owned();
    let gram = e1.adjoint() * &e1;
    let gram_inv = gram.try_inverse().ok_or_else(|| {
        Error::Estimation(format!(
            "subarray Gram matrix is singular; eigenvalues {eigenvalues:?}"
        ))
    })?;
    let psi = gram_inv * e1.adjoint() * e2;
    let phases: Vec<Complex64> = if num_sources == 1 {
        vec![psi[(0, 0)]]
    } else {
        let schur = Schur::try_new(psi, 1e-14, 10_000).ok_or_else(|| {
            Error::Estimation("rotation matrix eigen-decomposition did not converge".into())
        })?;
        let (_, t) = schur.unpack();
        t.diagonal().iter().copied().collect()
    };

    let mut angles_deg = phases
        .iter()
        .map(|z| {
            if z.norm() == 0.0 {
                return Err(Error::Estimation("zero rotation eigenvalue".into()));
            }
            let s = (-z.arg() / std::f64::consts::PI).clamp(-1.0, 1.0);
            Ok(s.asin().to_degrees())
        })
        .collect::<Result<Vec<f64>>>()?;
    angles_deg.sort_by(f64::total_cmp);
    Ok(EspritEstimate {
        angles_deg,
        eigenvalues,
        eigengap,
    })
}
