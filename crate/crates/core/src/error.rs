//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed cell or structure in a CSV file. `line` is 1-based and counts
    /// the header row.
    #[error("{path}: line {line}, column {column}: {message}")]
    Csv {
        path: PathBuf,
        line: usize,
        column: String,
        message: String,
    },

    #[error("target column {0:?} not found in header")]
    MissingTargetColumn(String),

    #[error("need at least 2 classes, found {0}")]
    TooFewClasses(usize),

    #[error("need at least 2 instances, found {0}")]
    TooFewInstances(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("class {class:?} has {count} members, fewer than the required {required}")]
    ClassTooSmall {
        class: String,
        count: usize,
        required: usize,
    },

    #[error("invalid cutoff grid: {0}")]
    InvalidGrid(String),

    #[error("feature sets do not match: {0}")]
    FeatureMismatch(String),

    #[error("unknown method {0:?}")]
    UnknownMethod(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("non-finite value during training at epoch {epoch}, batch {batch}")]
    NonFiniteTraining { epoch: usize, batch: usize },

    #[error("non-finite logistic-regression objective at iteration {iter}")]
    NonFiniteObjective { iter: usize },

    #[error("malformed model file {path}: {message}")]
    ModelFormat { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
