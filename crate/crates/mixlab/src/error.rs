use thiserror::Error;

/// Errors shared across the laboratory modules.
#[derive(Debug, Error)]
pub enum MixError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numeric degeneracy: {0}")]
    NumericDegeneracy(String),

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("degenerate tuple: {0}")]
    DegenerateTuple(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, MixError>;
