use thiserror::Error;

use crate::lp::LpStatus;

pub type Result<T> = std::result::Result<T, CalibError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibError {
    #[error("input is empty")]
    EmptyInput,
    #[error("prediction {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("label {value} at index {index} is not 0 or 1")]
    BadLabel { index: usize, value: i64 },
    #[error("weight {value} at index {index} must be positive and finite")]
    BadWeight { index: usize, value: f64 },
    #[error("grid step {0} must lie in (0, 1]")]
    BadStep(f64),
    #[error("bin count must be at least 1, got {0}")]
    BadBins(usize),
    #[error("invalid partition: {0}")]
    BadPartition(String),
    #[error("interval width {0} must lie in (0, 1]")]
    BadWidth(f64),
    #[error("epsilon {0} is out of range")]
    BadEps(f64),
    #[error("alpha {0} is out of range")]
    BadAlpha(f64),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("estimator mode {mode} requires the Laplace kernel")]
    ModeKindMismatch { mode: &'static str },
    #[error("input size {size} exceeds the limit {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("LP solver failed with status {0:?}")]
    SolverFailure(LpStatus),
}
