use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("empty request: {0}")]
    EmptyRequest(&'static str),
    #[error("generation failed ({method}): {reason}")]
    Generation { method: &'static str, reason: String },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("insufficient data: need {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("non-positive volatility {value} at index {index}")]
    NonPositiveVolatility { index: usize, value: f64 },
    #[error("outside asymptotic regime: lambda = {0} must exceed 1")]
    OutOfRegime(f64),
    #[error("integrand singularity: {0}")]
    Singularity(String),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
