use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("{what}: requested {requested} exceeds budget {limit}")]
    Budget {
        what: &'static str,
        requested: u128,
        limit: u128,
    },

    #[error("{what}: step halving changed the value by {delta:e} (tolerance {tolerance:e})")]
    Quadrature {
        what: &'static str,
        delta: f64,
        tolerance: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{0}")]
    NotReached(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Resource exhaustion (budget) errors are reported separately by the CLI.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Budget { .. } | Error::Overflow(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
