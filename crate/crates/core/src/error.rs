use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two objects that must agree in shape do not.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A slot, zone or location index is out of range.
    #[error("index out of range: {what} = {index}, valid range is {min}..={max}")]
    Index {
        what: &'static str,
        index: usize,
        min: usize,
        max: usize,
    },

    /// Invalid configuration; `key` names the offending setting.
    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },

    /// Malformed input file.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    /// Topology cannot be built from the given inputs.
    #[error("topology construction failed: {0}")]
    Topology(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
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

pub type Result<T> = std::result::Result<T, Error>;
