use thiserror::Error;

/// Errors raised by the selection library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain mismatch: expected {expected} elements, got {got}")]
    DomainMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("hypothesis class is empty")]
    EmptyClass,

    #[error("index {index} out of range for {len} hypotheses")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("linear program failed: {0}")]
    Solver(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("illegal {role} move in round {round}: {reason}")]
    IllegalMove {
        role: String,
        round: usize,
        reason: String,
    },

    #[error("empty universe")]
    EmptyUniverse,

    #[error("round bound {bound} exceeded")]
    RoundBoundExceeded { bound: usize },

    #[error("restart cap {cap} exceeded")]
    RestartCapExceeded { cap: usize },

    #[error("oracle is in exact mode; sample draws are unavailable")]
    ExactModeMisuse,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
