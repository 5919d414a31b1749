//! Crate-wide error type. Variant names double as the machine-readable
//! reason prefixes the CLI prints on failure.

use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid-input: {0}")]
    InvalidInput(String),
    #[error("dimension-mismatch: {0}")]
    DimensionMismatch(String),
    #[error("numerical-failure: {0}")]
    NumericalFailure(String),
    #[error("insufficient-data: {0}")]
    InsufficientData(String),
    #[error("unsupported-prediction: {0}")]
    UnsupportedPrediction(String),
    /// Malformed input file; `row` and `col` are 1-based positions.
    #[error("parse: {path}:{row}:{col}: {msg}")]
    Parse {
        path: String,
        row: usize,
        col: usize,
        msg: String,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub fn parse(path: &Path, row: usize, col: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.display().to_string(),
            row,
            col,
            msg: msg.into(),
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Error::Io(format!("{}: {}", path.display(), err))
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
