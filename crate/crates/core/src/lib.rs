//! Simulation library for error-control-coded single-pixel imaging.
//!
//! A binary scene is illuminated by LT-code patterns, a bucket detector sums
//! the transmitted light with additive Gaussian noise, and the scene is
//! recovered by remapping each reading into GF(2) and running belief
//! propagation over the illumination graph. Uncoded ghost-imaging
//! reconstructions (correlation and box-constrained gradient projection) are
//! provided for comparison, and [`harness`] runs SNR sweeps over all methods.

pub mod bpdecoder;
pub mod channel;
pub mod error;
pub mod gibaseline;
pub mod harness;
pub mod ltcode;
pub mod metrics;
mod pnm;
pub mod remap;
pub mod rng;
pub mod scene;

pub use error::{Error, Result};
