use thiserror::Error;

/// Errors raised anywhere in the discretization and analysis pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("value {value} is outside the admissible range [{lower}, {upper}]")]
    OutOfRange { value: f64, lower: f64, upper: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("invalid reparametrization: {0}")]
    InvalidReparametrization(String),

    #[error("matrix is not positive definite: pivot {index} = {pivot:e}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("invalid reparametrization pair: {0}")]
    InvalidPair(String),

    /// The slope estimate left its admissible window by more than the 5% slack.
    #[error("slope estimate {estimate} violates the bounds [{lower}, {upper}]")]
    SlopeOutOfBounds { estimate: f64, lower: f64, upper: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
