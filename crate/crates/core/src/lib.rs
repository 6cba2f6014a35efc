//! Adversarial attacks on grid-classification DOA estimators and a
//! transformer purification defense against them.
//!
//! Pipeline: [`array`] simulates snapshots and encodes covariance tensors,
//! [`doa_net`] classifies them onto an angle grid, [`attack`] perturbs them
//! under an SIR budget, [`defense`] reconstructs clean inputs, [`classical`]
//! provides an ESPRIT reference and [`harness`] runs the evaluation sweeps.

pub mod array;
pub mod attack;
pub mod classical;
pub mod defense;
pub mod doa_net;
mod error;
pub mod harness;
pub mod nn;

pub use error::{Error, Result};
