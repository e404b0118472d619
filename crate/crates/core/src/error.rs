//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Input outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive integration could not continue; `psi` is the last good point.
    #[error("integration failure at psi = {psi}: {detail}")]
    IntegrationFailure { psi: f64, detail: String },

    /// Forced trajectory left the phase-plane annulus at `psi`.
    #[error("trajectory left the admissible annulus at psi = {psi}")]
    AnnulusExit { psi: f64 },

    /// Newton matching failed to converge; carries the residual norm history.
    #[error(
        "boundary matching did not converge after {iterations} iterations (residuals: {history:?})"
    )]
    NonConvergence {
        iterations: usize,
        history: Vec<f64>,
    },

    /// A period matrix failed its unipotent structure check.
    #[error(
        "period matrix structure defect {defect:.3e} exceeds {limit:.3e} (period misdetection?)"
    )]
    Structure { defect: f64, limit: f64 },

    /// Degenerate configuration (cylinder limit) where an operation is undefined.
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    /// Phase-plane projection failed: a sample is too far from the reference orbit.
    #[error(
        "phase projection failure at psi = {psi}: distance {distance:.3e} exceeds {limit:.3e}"
    )]
    Projection { psi: f64, distance: f64, limit: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
