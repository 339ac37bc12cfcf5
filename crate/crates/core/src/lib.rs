//! Heralded collective-spin excitation: physics models, synthetic data and
//! the statistical analysis that turns phase records into normalized
//! variances.

pub mod analysis;
pub mod config;
pub mod dataset_io;
pub mod dicke;
pub mod efficiency;
pub mod error;
pub mod fingerprint;
pub mod herald;
pub mod pipeline;
pub mod quadrature;
pub mod sim;

pub use error::{Error, Result};
