use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("outside validity regime: {0}")]
    Regime(String),
    #[error("enumeration budget exceeded: {0}")]
    Budget(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("undefined coefficient: {0}")]
    UndefinedCoefficient(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
