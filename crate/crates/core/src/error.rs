use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Table dimensions do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// An input violates a documented precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A linear solve or root finder failed.
    #[error("numerical failure: {0}")]
    Numeric(String),
    /// A configuration file or CLI argument is invalid.
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}

pub(crate) fn numeric(msg: impl Into<String>) -> Error {
    Error::Numeric(msg.into())
}
