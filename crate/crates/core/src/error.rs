use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration (dimension mismatch, bad hyperparameter).
    #[error("configuration error: {0}")]
    Config(String),

    /// A non-finite value was produced; `op` names the operation that produced it.
    #[error("numerical error in {op}: {detail}")]
    Numerical { op: &'static str, detail: String },

    /// API misuse, e.g. running backward on a variable from another tape.
    #[error("usage error: {0}")]
    Usage(String),

    /// Data that parsed but violates a domain invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Malformed input text. `record` names the offending line or record.
    #[error("parse error at {record}: {message}")]
    Parse { record: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn numerical(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Numerical {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn parse(record: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            record: record.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
