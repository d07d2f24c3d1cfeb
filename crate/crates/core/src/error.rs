use thiserror::Error;

/// Errors produced while reading or evaluating a network.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Case text could not be turned into a valid network.
    #[error("case parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("unknown branch index {0}")]
    UnknownBranch(usize),

    #[error("unknown bus {0}")]
    UnknownBus(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    /// No placement can satisfy the requested resilience options.
    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("enumeration guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("power flow did not converge: {0}")]
    NotConverged(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(line: usize, reason: impl Into<String>) -> Self {
        Error::Parse { line, reason: reason.into() }
    }
}
