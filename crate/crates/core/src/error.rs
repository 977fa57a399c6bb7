use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unsupported dtype: {0}")]
    UnsupportedDtype(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable code for this error class.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Format(_) => "E_FORMAT",
            Error::Validation(_) => "E_VALIDATION",
            Error::UnsupportedDtype(_) => "E_DTYPE",
            Error::Dimension(_) => "E_DIMENSION",
            Error::InsufficientData { .. } => "E_INSUFFICIENT_DATA",
            Error::Parameter(_) => "E_PARAMETER",
            Error::Io { .. } => "E_IO",
        }
    }

    /// Process exit code: 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            _ => 1,
        }
    }
}
