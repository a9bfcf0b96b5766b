use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GadiError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("zero pivot at step {step} after rounding to {format}")]
    SingularInPrecision { step: usize, format: &'static str },

    #[error("non-finite value produced in {0}")]
    OverflowDetected(String),

    #[error("iteration limit reached: {0}")]
    IterationLimit(String),

    #[error("inner solver stagnated after {iters} iterations (residual {residual:e})")]
    InnerStagnation { iters: usize, residual: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("no convergent alpha in [{lo}, {hi}]")]
    NoConvergentAlpha { lo: f64, hi: f64 },

    #[error("gaussian process fit failed: {0}")]
    Fit(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for GadiError {
    fn from(e: std::io::Error) -> Self {
        GadiError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GadiError>;
