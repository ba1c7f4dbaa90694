use std::path::PathBuf;

use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(ValidationReport),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("sequence of {len} samples is too short (needs more than {needed})")]
    SequenceTooShort { len: usize, needed: usize },
    #[error("non-finite value at sample {0}")]
    NonFinite(usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("invalid rate: {0}")]
    InvalidRate(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("regime {0} has no labelled samples")]
    RegimeAbsent(usize),
    #[error("only {got} positively weighted rows for an order-{order} fit")]
    InsufficientRows { got: usize, order: usize },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("model document: {0}")]
    Document(#[from] serde_json::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
