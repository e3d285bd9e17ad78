//! Calibration measures for binary probabilistic predictors.
//!
//! Every measure operates on an [`EmpiricalDistribution`] of
//! prediction-label pairs. Small finite problems with known Bayes values
//! live in [`fixtures`], together with exact enumeration oracles.

pub mod binning;
pub mod empirical;
pub mod error;
pub mod fixtures;
pub mod interval;
pub mod kernel;
pub mod lowerdist;
pub mod lp;
pub mod partitions;
pub mod rng;
pub mod smooth;

pub use empirical::{
    make_empirical, reliability_bins, round_to_grid, EmpiricalDistribution, ReliabilityBin, Sample,
};
pub use error::{CalibError, Result};
pub use rng::SeededRng;
