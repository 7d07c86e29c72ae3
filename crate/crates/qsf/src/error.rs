//! Crate-wide error type.

use thiserror::Error;

/// Unified error for construction, validation, and estimation failures.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument was out of range or otherwise malformed.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Matrix dimensions do not line up for the requested operation.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The requested full simulation exceeds the dense-matrix capacity cap.
    #[error(
        "simulation capacity exceeded: total dimension {required} > cap {cap}; \
         use the analytic sampler path instead"
    )]
    CapacityExceeded { required: usize, cap: usize },

    /// Input failed a structural validation check (Hermiticity, trace, PSD).
    #[error("validation failed: {0}")]
    Validation(String),

    /// An iterative numerical procedure did not converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A polynomial approximation missed its quality gate.
    #[error("approximation quality: {0}")]
    Approximation(String),

    /// Variational state preparation missed its infidelity target.
    #[error("training failed: best infidelity {best:.3e} > target {target:.3e}; try more layers")]
    Training { best: f64, target: f64 },

    /// The bisection search exhausted its budget without a consistent answer.
    #[error("search failed: {0}")]
    SearchFailure(String),

    /// File or parse problem in one of the text interchange formats.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
