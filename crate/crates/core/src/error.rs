//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Shapes or mode counts of the operands do not match.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Truncated tail mass is too large for the requested computation.
    #[error("tail mass {tail:.3e} exceeds threshold {threshold:.1e}")]
    Truncation { tail: f64, threshold: f64 },

    /// The requested object exceeds the dense-storage budget.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// An iterative or quadrature computation failed its own diagnostics.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
