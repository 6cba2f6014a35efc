//! Training-set recipes and the on-disk sample container.
//!
//! A container is a directory holding `manifest.json`, `samples.bin` and
//! `labels.bin`. Samples are little-endian `f32` records of `3*M*M` values.
//! Each label record holds `L` little-endian `u32` grid indices followed by
//! `L` little-endian `f32` true angles in degrees.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geometry::ArrayGeometry;
use super::snapshots::{collect_snapshots_with, sample_covariance, SourceScenario};
use super::tensor::{encode_covariance_tensor, CovarianceTensor, CHANNELS};
use super::waveform::{Modulation, WaveformConfig};
use crate::doa_net::DoaGrid;
use crate::error::{config, Result};

pub const FORMAT_VERSION: u32 = 1;
const VALIDATION_STREAM: u64 = 1 << 40;

/// Ground truth for one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub indices: Vec<usize>,
    pub angles_deg: Vec<f64>,
}

impl Label {
    pub fn from_angles(angles_deg: &[f64], grid: &DoaGrid) -> Self {
        Self {
            indices: angles_deg.iter().map(|&a| grid.nearest_index(a)).collect(),
            angles_deg: angles_deg.to_vec(),
        }
    }

    pub fn num_sources(&self) -> usize {
        self.angles_deg.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub tensor: CovarianceTensor,
    pub label: Label,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

/// Recipe for a grid-labelled training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub num_sources: usize,
    pub snr_db: Vec<f64>,
    /// Angles drawn for training; also the label grid.
    pub grid: DoaGrid,
    pub samples_per_doa: usize,
    pub snapshots: usize,
    pub modulation: Modulation,
    pub geometry: ArrayGeometry,
    #[serde(default)]
    pub waveform: WaveformConfig,
    #[serde(default = "default_true")]
    pub validation_split: bool,
}

fn default_true() -> bool {
    true
}

fn paper_snr_grid() -> Vec<f64> {
    (0..13).map(|i| -14.0 + 2.0 * i as f64).collect()
}

impl DatasetConfig {
    /// Single source, 13 SNRs x 181 angles x 10 samples.
    pub fn single_source_default() -> Self {
        Self {
            num_sources: 1,
            snr_db: paper_snr_grid(),
            grid: DoaGrid::single_source(),
            samples_per_doa: 10,
            snapshots: 1024,
            modulation: Modulation::Bpsk,
            geometry: ArrayGeometry::ula(8),
            waveform: WaveformConfig::default(),
            validation_split: true,
        }
    }

    /// Two sources, every unordered pair of the 121-angle grid, 2 samples per pair and SNR.
    pub fn dual_source_default() -> Self {
        Self {
            num_sources: 2,
            grid: DoaGrid::dual_source(),
            samples_per_doa: 2,
            ..Self::single_source_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.num_sources) {
            return Err(config(format!(
                "num_sources must be 1 or 2, got {}",
                self.num_sources
            )));
        }
        if self.snr_db.iter().any(|s| s.is_nan()) {
            return Err(config("SNR grid contains NaN"));
        }
        if self.snapshots == 0 {
            return Err(config("snapshots must be positive"));
        }
        if self.grid.start_deg < -90.0 || self.grid.stop_deg() > 90.0 {
            return Err(config("angle grid must lie within [-90, 90]"));
        }
        if self.num_sources == 2 && self.grid.len() < 2 {
            return Err(config("dual-source recipe needs at least two grid angles"));
        }
        Ok(())
    }

    /// Angle sets drawn at each SNR, in generation order.
    pub fn doa_sets(&self) -> Vec<Vec<f64>> {
        let angles = self.grid.angles();
        match self.num_sources {
            1 => angles.iter().map(|&a| vec![a]).collect(),
            _ => {
                let mut out = Vec::new();
                for i in 0..angles.len() {
                    for j in (i + 1)..angles.len() {
                        out.push(vec![angles[i], angles[j]]);
                    }
                }
                out
            }
        }
    }

    pub fn samples_per_doa_for(&self, split: Split) -> usize {
        match split {
            Split::Train => self.samples_per_doa,
            Split::Validation => self.samples_per_doa / 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub angles_deg: Vec<f64>,
    pub snr_db: f64,
    pub count: usize,
    /// Index of the entry's first sample.
    pub first_sample: usize,
    /// Byte offset of the entry's first record in `samples.bin`.
    pub sample_byte_offset: u64,
    /// Byte offset of the entry's first record in `labels.bin`.
    pub label_byte_offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub split: Split,
    pub num_sources: usize,
    pub geometry: ArrayGeometry,
    pub grid: DoaGrid,
    pub snr_db: Vec<f64>,
    pub snapshots: usize,
    pub modulation: Modulation,
    pub waveform: WaveformConfig,
    pub seed: u64,
    pub channel_semantics: Vec<String>,
    pub endianness: String,
    pub dtype: String,
    pub record_shape: [usize; 3],
    pub label_layout: String,
    pub sample_count: usize,
    pub entries: Vec<ManifestEntry>,
    /// Free-form provenance, e.g. the attack that produced the samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl DatasetManifest {
    /// Plan a split without synthesising any data.
    pub fn plan(cfg: &DatasetConfig, split: Split, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.geometry.element_count();
        let per = cfg.samples_per_doa_for(split);
        let sample_bytes = (CHANNELS * m * m * 4) as u64;
        let label_bytes = (cfg.num_sources * 8) as u64;
        let doas = cfg.doa_sets();
        let mut entries = Vec::with_capacity(doas.len() * cfg.snr_db.len());
        let mut next = 0usize;
        for &snr in &cfg.snr_db {
            for angles in &doas {
                entries.push(ManifestEntry {
                    angles_deg: angles.clone(),
                    snr_db: snr,
                    count: per,
                    first_sample: next,
                    sample_byte_offset: next as u64 * sample_bytes,
                    label_byte_offset: next as u64 * label_bytes,
                });
                next += per;
            }
        }
        Ok(Self {
            format_version: FORMAT_VERSION,
            split,
            num_sources: cfg.num_sources,
            geometry: cfg.geometry.clone(),
            grid: cfg.grid.clone(),
            snr_db: cfg.snr_db.clone(),
            snapshots: cfg.snapshots,
            modulation: cfg.modulation,
            waveform: cfg.waveform.clone(),
            seed,
            channel_semantics: vec!["real".into(), "imag".into(), "phase".into()],
            endianness: "little".into(),
            dtype: "float32".into(),
            record_shape: [CHANNELS, m, m],
            label_layout: format!(
                "{} x u32 grid index, then {} x f32 angle (deg)",
                cfg.num_sources, cfg.num_sources
            ),
            sample_count: next,
            entries,
            provenance: None,
        })
    }

    pub fn elements(&self) -> usize {
        self.geometry.element_count()
    }

    fn check_counts(&self) -> Result<()> {
        let total: usize = self.entries.iter().map(|e| e.count).sum();
        if total != self.sample_count {
            return Err(config(format!(
                "manifest lists {total} samples across entries but sample_count is {}",
                self.sample_count
            )));
        }
        Ok(())
    }
}

/// Synthesise one encoded sample from a scenario.
pub fn simulate_sample(
    scenario: &SourceScenario,
    geometry: &ArrayGeometry,
    grid: &DoaGrid,
    waveform: &WaveformConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Sample> {
    let x = collect_snapshots_with(scenario, geometry, waveform, rng)?;
    let tensor = encode_covariance_tensor(&sample_covariance(&x)?)?;
    Ok(Sample {
        tensor,
        label: Label::from_angles(&scenario.angles_deg, grid),
    })
}

/// RNG stream for entry `index` of a split; independent of worker count.
pub fn entry_rng(seed: u64, split: Split, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = match split {
        Split::Train => 0,
        Split::Validation => VALIDATION_STREAM,
    };
    rng.set_stream(offset + index as u64);
    rng
}

/// Synthesise every sample listed in a planned manifest.
pub fn generate_samples(manifest: &DatasetManifest) -> Result<Vec<Sample>> {
    let per_entry: Vec<Vec<Sample>> = manifest
        .entries
        .par_iter()
        .enumerate()
        .map(|(idx, entry)| {
            let mut rng = entry_rng(manifest.seed, manifest.split, idx);
            let scenario = SourceScenario::new(
                entry.angles_deg.clone(),
                manifest.modulation,
                entry.snr_db,
                manifest.snapshots,
            )?;
            (0..entry.count)
                .map(|_| {
                    simulate_sample(
                        &scenario,
                        &manifest.geometry,
                        &manifest.grid,
                        &manifest.waveform,
                        &mut rng,
                    )
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_entry.into_iter().flatten().collect())
}

/// Write a container directory.
pub fn write_container(dir: &Path, manifest: &DatasetManifest, samples: &[Sample]) -> Result<()> {
    manifest.check_counts()?;
    if samples.len() != manifest.sample_count {
        return Err(config(format!(
            "manifest expects {} samples, got {}",
            manifest.sample_count,
            samples.len()
        )));
    }
    fs::create_dir_all(dir)?;
    let mut sw = BufWriter::new(File::create(dir.join("samples.bin"))?);
    let mut lw = BufWriter::new(File::create(dir.join("labels.bin"))?);
    let m = manifest.elements();
    for s in samples {
        if s.tensor.elements() != m || s.label.num_sources() != manifest.num_sources {
            return Err(config("sample shape does not match manifest"));
        }
        for &v in s.tensor.as_slice() {
            sw.write_all(&(v as f32).to_le_bytes())?;
        }
        for &i in &s.label.indices {
            lw.write_all(&(i as u32).to_le_bytes())?;
        }
        for &a in &s.label.angles_deg {
            lw.write_all(&(a as f32).to_le_bytes())?;
        }
    }
    sw.flush()?;
    lw.flush()?;
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_vec_pretty(manifest)?,
    )?;
    Ok(())
}

/// Read a container directory back into memory.
pub fn read_container(dir: &Path) -> Result<(DatasetManifest, Vec<Sample>)> {
    let manifest: DatasetManifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    manifest.check_counts()?;
    if manifest.endianness != "little" || manifest.dtype != "float32" {
        return Err(config(
            "only little-endian float32 containers are supported",
        ));
    }
    let m = manifest.elements();
    let l = manifest.num_sources;
    let record = CHANNELS * m * m;
    let mut sr = BufReader::new(File::open(dir.join("samples.bin"))?);
    let mut lr = BufReader::new(File::open(dir.join("labels.bin"))?);
    let mut buf4 = [0u8; 4];
    let mut samples = Vec::with_capacity(manifest.sample_count);
    for _ in 0..manifest.sample_count {
        let mut data = Vec::with_capacity(record);
        for _ in 0..record {
            sr.read_exact(&mut buf4)?;
            data.push(f32::from_le_bytes(buf4) as f64);
        }
        let mut indices = Vec::with_capacity(l);
        for _ in 0..l {
            lr.read_exact(&mut buf4)?;
            indices.push(u32::from_le_bytes(buf4) as usize);
        }
        let mut angles_deg = Vec::with_capacity(l);
        for _ in 0..l {
            lr.read_exact(&mut buf4)?;
            angles_deg.push(f32::from_le_bytes(buf4) as f64);
        }
        samples.push(Sample {
            tensor: CovarianceTensor::from_vec(m, data)?,
            label: Label {
                indices,
                angles_deg,
            },
        });
    }
    Ok((manifest, samples))
}

/// Generate and write the training split to `out`, and the validation
/// split to `out/val` when enabled. Returns the training manifest.
pub fn build_training_dataset(
    cfg: &DatasetConfig,
    seed: u64,
    out: &Path,
) -> Result<DatasetManifest> {
    let train = DatasetManifest::plan(cfg, Split::Train, seed)?;
    let samples = generate_samples(&train)?;
    write_container(out, &train, &samples)?;
    if cfg.validation_split {
        let val = DatasetManifest::plan(cfg, Split::Validation, seed)?;
        let samples = generate_samples(&val)?;
        write_container(&out.join("val"), &val, &samples)?;
    }
    Ok(train)
}
