use thiserror::Error;

/// Errors raised by the library. Monte Carlo replications never fail on
/// statistical grounds; these cover invalid inputs and I/O only.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("too few draws: need at least {needed}, got {got}")]
    TooFewDraws { needed: usize, got: usize },
    #[error("missing byproduct: {0}")]
    MissingByproduct(String),
    #[error("no member draws available")]
    NoMembers,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
