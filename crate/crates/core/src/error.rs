use std::path::PathBuf;

/// Errors produced by the kernels, the network loader, the bound recursion
/// and the certifier.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    /// Cholesky hit a non-positive pivot at `index` (0-based).
    #[error("matrix is not positive definite: pivot {pivot:e} at index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("scaling vector entry {index} is not strictly positive ({value:e})")]
    NonPositiveScaling { index: usize, value: f64 },

    /// Power iteration reached its iteration budget. `sigma` is the best
    /// available Rayleigh quotient and `residual` is `|A v - sigma v|`.
    #[error("power iteration did not converge after {iterations} iterations (sigma {sigma:e}, residual {residual:e})")]
    NotConverged {
        sigma: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("failed to parse network file {path}: {message}")]
    Parse { path: PathBuf, message: String },

    /// `layer` is 1-based: layer k consumes the output of layer k-1.
    #[error(
        "dimension chain broken at layer {layer}: expected {expected} input columns, found {found}"
    )]
    DimensionChain {
        layer: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid strategy configuration: {0}")]
    InvalidConfig(String),

    /// `M_{k+1}` failed to factor after choosing the multiplier for layer `layer`.
    #[error("definiteness lost after layer {layer} (pivot {pivot:e} at index {index})")]
    DefinitenessLost {
        layer: usize,
        index: usize,
        pivot: f64,
    },

    /// A spectral estimate used inside the recursion did not converge to an
    /// acceptable residual.
    #[error("spectral estimate for layer {layer} did not converge (sigma {sigma:e}, residual {residual:e})")]
    SpectralNotConverged {
        layer: usize,
        sigma: f64,
        residual: f64,
    },

    #[error("every grid point was infeasible ({attempted} attempted)")]
    AllInfeasible { attempted: usize },

    #[error("LMI dimension {dimension} exceeds the verification cap {cap}")]
    DimensionCapExceeded { dimension: usize, cap: usize },

    #[error("validation failed: {0}")]
    ValidationFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
