//! Baseband source waveforms: pulse-shaped linear modulations and OFDM.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::snapshots::SourceScenario;
use crate::error::{config, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Modulation {
    Bpsk,
    Qam16,
    Qam64,
    Qam256,
    Ofdm,
}

impl Modulation {
    pub const ALL: [Modulation; 5] = [
        Modulation::Bpsk,
        Modulation::Qam16,
        Modulation::Qam64,
        Modulation::Qam256,
        Modulation::Ofdm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Bpsk => "BPSK",
            Modulation::Qam16 => "QAM16",
            Modulation::Qam64 => "QAM64",
            Modulation::Qam256 => "QAM256",
            Modulation::Ofdm => "OFDM",
        }
    }

    /// Constellation used for single-carrier symbols, `None` for OFDM.
    fn constellation(self) -> Option<Constellation> {
        match self {
            Modulation::Bpsk => Some(Constellation::Bpsk),
            Modulation::Qam16 => Some(Constellation::Qam(4)),
            Modulation::Qam64 => Some(Constellation::Qam(8)),
            Modulation::Qam256 => Some(Constellation::Qam(16)),
            Modulation::Ofdm => None,
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_uppercase();
        match norm.as_str() {
            "BPSK" => Ok(Modulation::Bpsk),
            "QAM16" | "16QAM" => Ok(Modulation::Qam16),
            "QAM64" | "64QAM" => Ok(Modulation::Qam64),
            "QAM256" | "256QAM" => Ok(Modulation::Qam256),
            "OFDM" => Ok(Modulation::Ofdm),
            _ => Err(config(format!("unsupported modulation '{s}'"))),
        }
    }
}

impl TryFrom<String> for Modulation {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Modulation> for String {
    fn from(m: Modulation) -> Self {
        m.name().to_string()
    }
}

#[derive(Clone, Copy, Debug)]
enum Constellation {
    Bpsk,
    /// Square QAM with `side` levels per rail.
    Qam(usize),
}

impl Constellation {
    fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> Complex64 {
        match self {
            Constellation::Bpsk => {
                if rng.random::<bool>() {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(-1.0, 0.0)
                }
            }
            Constellation::Qam(side) => {
                let order = (side * side) as f64;
                let norm = (2.0 * (order - 1.0) / 3.0).sqrt();
                let level = |i: usize| (2.0 * i as f64 - (side as f64 - 1.0)) / norm;
                Complex64::new(
                    level(rng.random_range(0..side)),
                    level(rng.random_range(0..side)),
                )
            }
        }
    }
}

/// Pulse-shaping and OFDM parameters, recorded in dataset manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveformConfig {
    pub roll_off: f64,
    pub samples_per_symbol: usize,
    /// Filter length in symbol periods.
    pub filter_span: usize,
    pub ofdm_subcarriers: usize,
    pub ofdm_cyclic_prefix: usize,
    pub ofdm_loading: Modulation,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        Self {
            roll_off: 0.5,
            samples_per_symbol: 8,
            filter_span: 8,
            ofdm_subcarriers: 64,
            ofdm_cyclic_prefix: 16,
            ofdm_loading: Modulation::Qam16,
        }
    }
}

/// Root-raised-cosine taps, scaled so that unit-power symbols upsampled by
/// `sps` produce unit average output power (sum of squared taps = `sps`).
pub fn rrc_taps(roll_off: f64, sps: usize, span: usize) -> Vec<f64> {
    let beta = roll_off;
    let half = (span * sps / 2) as isize;
    let mut taps: Vec<f64> = (-half..=half)
        .map(|n| {
            let t = n as f64 / sps as f64;
            if n == 0 {
                1.0 - beta + 4.0 * beta / PI
            } else if beta > 0.0 && (t.abs() - 1.0 / (4.0 * beta)).abs() < 1e-12 {
                beta / 2f64.sqrt()
                    * ((1.0 + 2.0 / PI) * (PI / (4.0 * beta)).sin()
                        + (1.0 - 2.0 / PI) * (PI / (4.0 * beta)).cos())
            } else {
                let num =
                    (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
                let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
                num / den
            }
        })
        .collect();
    let energy: f64 = taps.iter().map(|h| h * h).sum();
    let scale = (sps as f64 / energy).sqrt();
    taps.iter_mut().for_each(|h| *h *= scale);
    taps
}

fn shaped_waveform<R: Rng + ?Sized>(
    constellation: Constellation,
    len: usize,
    wf: &WaveformConfig,
    taps: &[f64],
    rng: &mut R,
) -> Vec<Complex64> {
    let sps = wf.samples_per_symbol;
    // start once the filter is fully overlapped with symbols
    let start = taps.len() - 1;
    let n_symbols = (start + len).div_ceil(sps) + 1;
    let symbols: Vec<Complex64> = (0..n_symbols).map(|_| constellation.sample(rng)).collect();
    (start..start + len)
        .map(|n| {
            let mut acc = Complex64::new(0.0, 0.0);
            // symbol k contributes taps[n - k*sps] when that index is in range
            let k_hi = n / sps;
            let k_lo = (n + 1).saturating_sub(taps.len()).div_ceil(sps);
            for k in k_lo..=k_hi.min(n_symbols - 1) {
                acc += symbols[k] * taps[n - k * sps];
            }
            acc
        })
        .collect()
}

fn ofdm_waveform<R: Rng + ?Sized>(
    len: usize,
    wf: &WaveformConfig,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let n = wf.ofdm_subcarriers;
    let loading = wf
        .ofdm_loading
        .constellation()
        .ok_or_else(|| config("OFDM subcarrier loading must be a single-carrier constellation"))?;
    if n == 0 || wf.ofdm_cyclic_prefix > n {
        return Err(config(
            "OFDM needs subcarriers > 0 and cyclic prefix <= subcarriers",
        ));
    }
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = Vec::with_capacity(len + n + wf.ofdm_cyclic_prefix);
    let mut block = vec![Complex64::new(0.0, 0.0); n];
    while out.len() < len {
        block.iter_mut().for_each(|x| *x = loading.sample(rng));
        ifft.process(&mut block);
        block.iter_mut().for_each(|x| *x *= scale);
        out.extend_from_slice(&block[n - wf.ofdm_cyclic_prefix..]);
        out.extend_from_slice(&block);
    }
    out.truncate(len);
    Ok(out)
}

/// One independent unit-average-power waveform per source, `L x K`.
pub fn synthesize_sources_with<R: Rng + ?Sized>(
    scenario: &SourceScenario,
    wf: &WaveformConfig,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    scenario.validate()?;
    let k = scenario.snapshots;
    let l = scenario.angles_deg.len();
    let mut s = DMatrix::zeros(l, k);
    let taps = match scenario.modulation {
        Modulation::Ofdm => Vec::new(),
        _ => rrc_taps(wf.roll_off, wf.samples_per_symbol, wf.filter_span),
    };
    for row in 0..l {
        let samples = match scenario.modulation.constellation() {
            Some(c) => shaped_waveform(c, k, wf, &taps, rng),
            None => ofdm_waveform(k, wf, rng)?,
        };
        for (col, v) in samples.into_iter().enumerate() {
            s[(row, col)] = v;
        }
    }
    Ok(s)
}

pub fn synthesize_sources(scenario: &SourceScenario, seed: u64) -> Result<DMatrix<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synthesize_sources_with(scenario, &WaveformConfig::default(), &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(m: Modulation, l: usize) -> SourceScenario {
        let angles = if l == 1 { vec![0.0] } else { vec![-10.0, 20.0] };
        SourceScenario::new(angles, m, 10.0, 1024).unwrap()
    }

    fn row_power(s: &DMatrix<Complex64>, r: usize) -> f64 {
        s.row(r).iter().map(|z| z.norm_sqr()).sum::<f64>() / s.ncols() as f64
    }

    #[test]
    fn unit_power_monte_carlo() {
        // mean over 100 seeds of the per-row average power
        for m in Modulation::ALL {
            let sc = scenario(m, 1);
            let mean: f64 = (0..100)
                .map(|seed| row_power(&synthesize_sources(&sc, seed).unwrap(), 0))
                .sum::<f64>()
                / 100.0;
            assert!((mean - 1.0).abs() < 0.1, "{m}: mean power {mean}");
        }
    }

    #[test]
    fn bpsk_shape_and_determinism() {
        let sc = scenario(Modulation::Bpsk, 1);
        let a = synthesize_sources(&sc, 7).unwrap();
        let b = synthesize_sources(&sc, 7).unwrap();
        assert_eq!(a.shape(), (1, 1024));
        assert_eq!(a, b);
        assert_ne!(a, synthesize_sources(&sc, 8).unwrap());
    }

    #[test]
    fn two_sources_are_uncorrelated() {
        let sc = scenario(Modulation::Bpsk, 2);
        let mut mean_abs = 0.0;
        for seed in 0..100 {
            let s = synthesize_sources(&sc, seed).unwrap();
            let cross: Complex64 = s
                .row(0)
                .iter()
                .zip(s.row(1).iter())
                .map(|(a, b)| a * b.conj())
                .sum();
            let rho = cross.norm() / (row_power(&s, 0) * row_power(&s, 1)).sqrt() / 1024.0;
            mean_abs += rho;
        }
        mean_abs /= 100.0;
        assert!(mean_abs < 0.1, "mean |rho| = {mean_abs}");
    }

    #[test]
    fn rrc_energy_normalised() {
        let taps = rrc_taps(0.5, 8, 8);
        assert_eq!(taps.len(), 65);
        let e: f64 = taps.iter().map(|h| h * h).sum();
        assert!((e - 8.0).abs() < 1e-9);
        // symmetric
        for i in 0..taps.len() {
            assert!((taps[i] - taps[taps.len() - 1 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_modulation_is_config_error() {
        assert!(matches!(
            "8PSK".parse::<Modulation>(),
            Err(Error::Config(_))
        ));
        assert_eq!("16qam".parse::<Modulation>().unwrap(), Modulation::Qam16);
        assert_eq!("ofdm".parse::<Modulation>().unwrap(), Modulation::Ofdm);
    }
}
