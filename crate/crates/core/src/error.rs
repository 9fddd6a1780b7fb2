use std::fmt;

/// Errors raised by the numerical routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A truncation or size parameter is too small (or too large) for the request.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// A numerical procedure could not reach the requested accuracy.
    #[error("accuracy error in {what}: achieved {achieved:.3e}, requested {requested:.3e}")]
    Accuracy {
        what: String,
        achieved: f64,
        requested: f64,
    },
    /// An input that another computation depends on is missing.
    #[error("dependency error: {0}")]
    Dependency(String),
    /// On-disk cache file is malformed or from another format version.
    #[error("cache error: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl fmt::Display) -> Self {
        Error::Domain(msg.to_string())
    }

    pub(crate) fn parameter(msg: impl fmt::Display) -> Self {
        Error::Parameter(msg.to_string())
    }

    pub(crate) fn accuracy(what: impl fmt::Display, achieved: f64, requested: f64) -> Self {
        Error::Accuracy {
            what: what.to_string(),
            achieved,
            requested,
        }
    }
}
