use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or indices that do not line up.
    #[error("structural error: {0}")]
    Structure(String),

    /// A distribution or prior parameter outside its domain.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Inconsistent fit or run configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A linear system that could not be factorized.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Malformed on-disk data.
    #[error("format error in {path}: {msg} (byte offset {offset})")]
    Format { path: PathBuf, offset: u64, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
