use thiserror::Error;

/// Errors raised by model construction, sampling and evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The requested combination is valid mathematically but not supported.
    #[error("unsupported: {0}")]
    Capability(String),
    /// A tree or hierarchy does not have the required shape.
    #[error("structure error: {0}")]
    Structure(String),
    /// Inconsistent model configuration.
    #[error("configuration error: {0}")]
    Config(String),
    #[error("index {index} out of range for dimension {dimension}")]
    Index { index: usize, dimension: usize },
    /// A quantity that must be positive came out with the wrong sign.
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn capability(msg: impl Into<String>) -> Self {
        Error::Capability(msg.into())
    }

    pub(crate) fn structure(msg: impl Into<String>) -> Self {
        Error::Structure(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
