use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("{file}: line {line}: {message}")]
    Parse {
        file: String,
        line: u64,
        message: String,
    },
    #[error("unsupported schema version {found} in {file} (expected {expected})")]
    SchemaVersion {
        file: String,
        found: String,
        expected: u32,
    },
    #[error("checkpoint was written for config digest {checkpoint}, current config has {current}")]
    DigestMismatch { checkpoint: String, current: String },
    #[error("missing file {}", .0.display())]
    Missing(PathBuf),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] pursuit_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;
