use thiserror::Error;

/// Errors raised by the library. Domain errors carry the violated precondition.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid divisor: {0}")]
    InvalidDivisor(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("spherical triangle does not exist: {0}")]
    NoTriangle(String),
    #[error("divisor is not solvable: {0}")]
    NotSolvable(String),
    #[error("newton iteration did not converge after {iterations} steps (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("linear solve failed: {0}")]
    Linear(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that come from reading or writing files.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
