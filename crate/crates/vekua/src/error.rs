//! Error types shared across the crate.

use thiserror::Error;

/// Unified error type for model construction, solving, training, data
/// generation, and I/O.
#[derive(Debug, Error)]
pub enum VekuaError {
    /// An input dimensionality that the operation cannot accept.
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    /// Mismatched shapes between cooperating arrays.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A size parameter (e.g. bank size K) outside its valid range.
    #[error("invalid size: {0}")]
    InvalidSize(String),

    /// A scalar parameter outside its valid range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Cholesky factorization failed: the Gram matrix is not numerically
    /// positive definite. Carries the pivot index at which the failure
    /// occurred so callers can diagnose collapsed feature columns.
    #[error("singular system: Cholesky pivot {pivot} is not positive (lambda = {lambda:e})")]
    SingularSystem { pivot: usize, lambda: f64 },

    /// A training step failed inside a specific cascade block.
    #[error("cascade block {block} failed: {source}")]
    BlockFailed {
        block: usize,
        #[source]
        source: Box<VekuaError>,
    },

    /// The recovered derivative passed through zero, so dividing the flux by
    /// it would be meaningless. Carries the offending evaluation point.
    #[error("near-singular derivative |u'({x})| = {value:e} < 1e-3; diffusion recovery aborted")]
    NearSingularDerivative { x: f64, value: f64 },

    /// Metric or recovery routines received empty or inconsistent input.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A serialized model could not be decoded.
    #[error("model format error: {0}")]
    ModelFormat(String),

    /// Underlying file-system failure during save/load or export.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, VekuaError>;
