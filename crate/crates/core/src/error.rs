use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("Hermite degree {degree} exceeds the supported maximum {max}")]
    DegreeOverflow { degree: usize, max: usize },

    #[error(
        "oracle budget too small: 3*stderr = {achieved:.3e} exceeds tolerance {tolerance:.3e}"
    )]
    ToleranceContract { achieved: f64, tolerance: f64 },

    #[error("query rejected: squared norm estimate {estimate:.6} exceeds {bound} + 3*stderr ({stderr:.3e})")]
    QueryNorm {
        estimate: f64,
        bound: f64,
        stderr: f64,
    },

    #[error("expectation engine cannot classify concept {concept}: |value| = {value:.3e}, tau = {tau:.3e}, engine error = {error:.3e}")]
    EnginePrecision {
        concept: usize,
        value: f64,
        tau: f64,
        error: f64,
    },

    #[error("training diverged at step {step}: loss = {loss:e}")]
    Diverged { step: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
