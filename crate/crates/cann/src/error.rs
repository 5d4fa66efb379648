//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CannError {
    /// A mathematical function was called outside its domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Incompatible array or vector dimensions.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),
    /// An optimizer left the feasible region or produced non-finite values.
    #[error("divergence: {0}")]
    Diverged(String),
    /// Invalid configuration.
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CannError>;

impl CannError {
    pub fn domain(msg: impl Into<String>) -> Self {
        CannError::Domain(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        CannError::Shape(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CannError::Data(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CannError::Config(msg.into())
    }
}
