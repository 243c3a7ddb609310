use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "spectral bounds violated: one step scaled the norm by {norm} (bounds [{e_min}, {e_max}])"
    )]
    SpectralBounds { norm: f64, e_min: f64, e_max: f64 },

    #[error("Lanczos did not converge after {iterations} iterations (residual {residual:e})")]
    LanczosNotConverged { iterations: usize, residual: f64 },

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("undefined effective inverse temperature: {0}")]
    UndefinedBeta(String),

    #[error("serialization: {0}")]
    Serialization(String),
}
