use thiserror::Error;

/// Errors produced by state construction, sampling, and verification.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    MalformedInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("state is not physical: {0}")]
    NonPhysical(String),

    #[error("numeric error: {msg}")]
    Numeric { msg: String, condition: Option<f64> },

    #[error("truncation error: tail mass {tail:.3e} exceeds tolerance at dimension {dim}")]
    Truncation { tail: f64, dim: usize },

    #[error("degenerate split: {plus} records above threshold, {minus} below")]
    DegenerateSplit { plus: usize, minus: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("incomplete input: {0}")]
    IncompleteInput(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric {
            msg: msg.into(),
            condition: None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
