//! Experiment driver for the pursuit-evasion workbench: configuration,
//! training, evaluation sweeps, trajectory analysis and self-checks.

pub mod analyze;
pub mod config;
pub mod error;
pub mod eval;
pub mod rollout;
pub mod selfcheck;
pub mod tables;
pub mod train;

pub use config::{ExperimentConfig, Strategy};
pub use error::{CliError, Result};
