//! Certified minimum-output-entropy additivity violation for random quantum
//! channels: free-probability limit spectra, explicit concentration
//! thresholds, seeded Monte Carlo cross-checks, and an exact-rational
//! smooth bump construction.

pub mod bump;
pub mod cli;
pub mod certifier;
pub mod error;
pub mod freelimits;
pub mod matops;
pub mod montecarlo;

pub use error::{Error, Result};
