//! Def-Transformer purification network and its joint reconstruction loss.

mod attention;
mod config;
mod flops;
mod model;
mod train;

pub use attention::{anchored_attention, cosine_window_attention, AnchoredOutput};
pub use config::{DefTransformerConfig, ReconstructionNorm};
pub use flops::{assa_flop_estimate, global_flop_estimate};
pub use model::{DefTransformer, Orientation, StripePattern, TransformerLayer, CHECKPOINT_KIND};
pub use train::{
    joint_loss, reconstruction_error, train_defense, validation_losses, DefenseEpoch, DefenseLog,
    JointLoss, LrSchedule, PairedSet,
};
