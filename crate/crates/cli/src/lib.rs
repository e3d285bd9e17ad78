//! The `calib` command-line tool: measure, generate, sweep and reliability.

pub mod commands;
pub mod error;
pub mod input;
pub mod metrics;

pub use commands::run;
pub use error::CliError;
