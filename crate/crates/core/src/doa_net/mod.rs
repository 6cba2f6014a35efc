//! Grid-classification DOA network, decoding and confidence scores.

mod decode;
mod grid;
mod model;
mod train;

pub use decode::{conf_dual, conf_single, decode_angles, top_indices};
pub use grid::DoaGrid;
pub use model::{DoaClassifier, DoaNetConfig, Prediction, CHECKPOINT_KIND};
pub(crate) use train::epoch_order;
pub use train::{train_baseline, TrainSchedule, TrainingLog};
