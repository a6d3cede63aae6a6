use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid shape {rows}x{cols}: dimensions must be positive")]
    InvalidShape { rows: usize, cols: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("unknown patient `{0}`")]
    UnknownPatient(String),

    #[error("missing forward cache: {0}")]
    MissingCache(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("timestamps for patient `{patient}` are not strictly increasing (line {line})")]
    NonMonotone { patient: String, line: usize },

    #[error("window is not contiguous: gap of {seconds}s after position {position}")]
    Gap { position: usize, seconds: i64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("true glucose must be positive for a percentage error, got {0}")]
    NonPositiveTruth(f64),

    #[error("rank-deficient design matrix")]
    RankDeficient,

    #[error("zero variance: {0}")]
    ZeroVariance(&'static str),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimMismatch {
            context,
            expected,
            actual,
        }
    }
}

/// Returns a dimension error unless `actual == expected`.
pub(crate) fn ensure_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::dims(context, expected, actual))
    }
}
