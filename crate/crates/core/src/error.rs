use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    /// A caller-supplied parameter is out of its domain (fractions, counts, thresholds).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The input data violates a structural rule (duplicate headers, unknown labels, ...).
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("class `{0}` has no examples in the training data")]
    ClassAbsent(String),

    #[error("class `{class}` has {count} members, fewer than the {k} folds requested")]
    TooFewClassMembers { class: String, count: usize, k: usize },

    #[error("model format: line {line}: {message}")]
    ModelFormat { line: usize, message: String },

    #[error("unsupported model version {found} (this build reads version {expected})")]
    VersionMismatch { found: String, expected: u32 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::InvalidData(msg.into())
    }

    pub(crate) fn format(line: usize, msg: impl Into<String>) -> Self {
        Error::ModelFormat {
            line,
            message: msg.into(),
        }
    }
}
