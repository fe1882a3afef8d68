use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cannot normalize the zero vector")]
    ZeroVector,

    #[error("direction {index} has zero length")]
    ZeroDirection { index: usize },

    #[error("measurement directions are nearly degenerate (condition number {condition:e} exceeds {limit:e})")]
    DegenerateGeometry { condition: f64, limit: f64 },

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("shot count must be at least 1")]
    ZeroShots,

    #[error("pair budget {budget} is too small; need at least {min}")]
    InsufficientBudget { budget: u64, min: u64 },

    #[error("observable basis is not orthonormal (residual {residual:e})")]
    NotOrthonormal { residual: f64 },

    #[error("phase search reached a concurrence gap of only {gap:.4} (required {required})")]
    SearchFailed { gap: f64, required: f64 },

    #[error("state literal, line {line}, field {field}: {message}")]
    Parse {
        line: usize,
        field: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
