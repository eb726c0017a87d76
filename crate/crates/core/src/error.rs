use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid subspace mask: {0}")]
    InvalidMask(String),

    #[error("matrix is not a valid {kind}: {reason}")]
    InvalidOperator { kind: &'static str, reason: String },

    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("state has zero overlap with every measurement outcome")]
    ZeroTotalProbability,

    #[error("{count} outcomes cannot be split into {folds} equal folds")]
    UnevenFolds { count: usize, folds: usize },

    #[error("training fold {fold} has no recorded events")]
    EmptyTrainingFold { fold: usize },

    #[error("every candidate subspace gives zero likelihood for the data")]
    IncompatibleData,

    #[error("empty sample")]
    EmptySample,

    #[error("only {valid} of {requested} bootstrap replicates succeeded")]
    TooManyFailedReplicates { valid: usize, requested: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
