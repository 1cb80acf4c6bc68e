use thiserror::Error;

/// Errors produced by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its mathematical domain (negative range,
    /// EDF target outside (0, n), ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data is unusable: non-finite values, shape mismatches,
    /// representation/architecture mismatches.
    #[error("input error: {0}")]
    Input(String),

    /// A numerical routine failed (factorization breakdown, singular
    /// covariance, divergence of an iteration).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A file does not have the expected format or is corrupt.
    #[error("format error: {0}")]
    Format(String),

    /// The request would exceed a resource guard (matrix too large).
    #[error("resource error: {0}")]
    Resource(String),

    /// Training failed (non-finite loss, bad configuration).
    #[error("training error: {0}")]
    Training(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
