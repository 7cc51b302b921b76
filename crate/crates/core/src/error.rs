use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {requested} exceeds the {max} available direction-number sets")]
    UnsupportedDimension { requested: usize, max: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("GPCA construction needs a pilot target")]
    MissingPilot,

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("degenerate weight: {0}")]
    DegenerateWeight(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("oracle failure: {0}")]
    OracleFailure(String),
}
