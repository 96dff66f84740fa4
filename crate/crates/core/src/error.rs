use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("model is not stationary (companion spectral radius {0:.6} >= 1)")]
    NonStationary(f64),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) | Error::UnknownMethod(_) => ErrorKind::Usage,
            Error::Singular(_) | Error::NonFinite(_) | Error::NonStationary(_) => {
                ErrorKind::Numerical
            }
            _ => ErrorKind::Data,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn mismatch(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}
