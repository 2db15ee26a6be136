use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}, column '{column}': {message}")]
    Cell {
        path: PathBuf,
        line: u64,
        column: String,
        message: String,
    },

    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed report: {0}")]
    Report(String),

    #[error(transparent)]
    Core(#[from] ldpsgd::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
