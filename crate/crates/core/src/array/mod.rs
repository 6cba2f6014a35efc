//! Far-field narrow-band array simulation and covariance-tensor encoding.

pub mod dataset;
pub mod geometry;
pub mod snapshots;
pub mod tensor;
pub mod waveform;

pub use dataset::{
    build_training_dataset, generate_samples, read_container, write_container, DatasetConfig,
    DatasetManifest, Label, ManifestEntry, Sample, Split,
};
pub use geometry::{steering_matrix, steering_vector, ArrayGeometry};
pub use snapshots::{
    collect_snapshots, collect_snapshots_with, sample_covariance, SnapshotMatrix, SourceScenario,
};
pub use tensor::{encode_covariance_tensor, CovarianceTensor};
pub use waveform::{synthesize_sources, synthesize_sources_with, Modulation, WaveformConfig};
