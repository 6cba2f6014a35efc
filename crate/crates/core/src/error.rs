use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A configuration is inconsistent or names something unsupported.
    #[error("configuration error: {0}")]
    Config(String),
    /// A gradient attack could not proceed.
    #[error("attack error: {0}")]
    Attack(String),
    /// A classical estimator failed, usually on a degenerate subspace.
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error(transparent)]
    Tensor(#[from] candle_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
