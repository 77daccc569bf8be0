use thiserror::Error;

/// Errors raised by the simulation, learning and analysis primitives.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singularity: {0}")]
    Singularity(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("not ready: have {have} samples, need {need}")]
    NotReady { have: usize, need: usize },
    #[error("empty input: {0}")]
    EmptyInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
