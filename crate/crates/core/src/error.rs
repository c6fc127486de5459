use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("vertex index {index} out of range for {n_vertices} vertices ({context})")]
    Bounds {
        index: usize,
        n_vertices: usize,
        context: String,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("inconsistent graph: {0}")]
    Inconsistent(String),

    #[error("non-finite value in {term}")]
    NonFinite { term: String },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("instance too large for the scalar oracle: {0}")]
    TooLarge(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    /// Short machine-readable class, used by the CLI on standard error.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Bounds { .. } => "bounds",
            Error::Shape(_) => "shape",
            Error::InvalidValue(_) => "invalid-value",
            Error::Inconsistent(_) => "inconsistent",
            Error::NonFinite { .. } => "numeric",
            Error::Validation(_) => "validation",
            Error::TooLarge(_) => "too-large",
            Error::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => {
                "file-not-found"
            }
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn non_finite(term: impl Into<String>) -> Self {
        Error::NonFinite { term: term.into() }
    }
}
