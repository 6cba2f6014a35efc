use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::geometry::{steering_matrix, ArrayGeometry};
use super::waveform::{synthesize_sources_with, Modulation, WaveformConfig};
use crate::error::{domain, Result};

/// Generative recipe for one sample: sources, modulation, SNR and snapshot count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceScenario {
    pub angles_deg: Vec<f64>,
    pub modulation: Modulation,
    /// Per-element received SNR; `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub snapshots: usize,
}

impl SourceScenario {
    pub fn new(
        angles_deg: Vec<f64>,
        modulation: Modulation,
        snr_db: f64,
        snapshots: usize,
    ) -> Result<Self> {
        let s = Self {
            angles_deg,
            modulation,
            snr_db,
            snapshots,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn num_sources(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.angles_deg.len();
        if !(1..=2).contains(&l) {
            return Err(domain(format!("source count must be 1 or 2, got {l}")));
        }
        if self.snapshots == 0 {
            return Err(domain("snapshot count must be positive"));
        }
        if self.snr_db.is_nan() {
            return Err(domain("SNR is NaN"));
        }
        for &a in &self.angles_deg {
            if !(-90.0..=90.0).contains(&a) {
                return Err(domain(format!("angle {a} outside [-90, 90]")));
            }
        }
        if self.angles_deg.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain("angles must be distinct and sorted ascending"));
        }
        Ok(())
    }
}

/// Received array data, `M x K`.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotMatrix {
    data: DMatrix<Complex64>,
}

impl SnapshotMatrix {
    pub fn new(data: DMatrix<Complex64>) -> Result<Self> {
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(domain("snapshot matrix has non-finite entries"));
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn elements(&self) -> usize {
        self.data.nrows()
    }

    pub fn snapshots(&self) -> usize {
        self.data.ncols()
    }

    pub fn conjugate(&self) -> Self {
        Self {
            data: self.data.map(|z| z.conj()),
        }
    }
}

/// `X = A S + N` with circular Gaussian noise scaled against the mean
/// received signal power so the per-element SNR equals `snr_db`.
pub fn collect_snapshots_with<R: Rng + ?Sized>(
    scenario: &SourceScenario,
    geometry: &ArrayGeometry,
    wf: &WaveformConfig,
    rng: &mut R,
) -> Result<SnapshotMatrix> {
    let s = synthesize_sources_with(scenario, wf, rng)?;
    let a = steering_matrix(&scenario.angles_deg, geometry)?;
    let mut x = a * s;
    if scenario.snr_db.is_finite() {
        let signal_power = x.iter().map(|z| z.norm_sqr()).sum::<f64>() / x.len() as f64;
        let noise_power = signal_power / 10f64.powf(scenario.snr_db / 10.0);
        let sigma = (noise_power / 2.0).sqrt();
        for z in x.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z += Complex64::new(sigma * re, sigma * im);
        }
    }
    SnapshotMatrix::new(x)
}

pub fn collect_snapshots(
    scenario: &SourceScenario,
    geometry: &ArrayGeometry,
    seed: u64,
) -> Result<SnapshotMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    collect_snapshots_with(scenario, geometry, &WaveformConfig::default(), &mut rng)
}

/// `(1/K) sum_n x(n) x(n)^H`, symmetrised so the result is exactly Hermitian.
pub fn sample_covariance(x: &SnapshotMatrix) -> Result<DMatrix<Complex64>> {
    let k = x.snapshots();
    if k == 0 {
        return Err(domain("sample covariance needs at least one snapshot"));
    }
    let d = x.data();
    let mut r = (d * d.adjoint()).unscale(k as f64);
    let m = r.nrows();
    for i in 0..m {
        r[(i, i)].im = 0.0;
        for j in (i + 1)..m {
            let v = (r[(i, j)] + r[(j, i)].conj()) * 0.5;
            r[(i, j)] = v;
            r[(j, i)] = v.conj();
        }
    }
    Ok(r)
}
