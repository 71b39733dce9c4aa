use thiserror::Error;

/// Errors raised anywhere in the theory solver, simulator or fitter.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("singular spectral average: 2*eta + g*a vanishes (eta = {eta}, g = {g})")]
    SingularMoment { eta: f64, g: f64 },
    #[error(
        "{what} did not converge after {iterations} iterations (residual norm {residual:.3e})"
    )]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("phase boundary: {0}")]
    PhaseBoundary(String),
    #[error(
        "calibration failed: {message} (kappa at bracket ends: {kappa_low:.4}, {kappa_high:.4})"
    )]
    Calibration {
        message: String,
        kappa_low: f64,
        kappa_high: f64,
    },
    #[error("invalid solution: {0}")]
    InvalidSolution(String),
    #[error("Hessian is not positive definite (rank-deficient design at eta = 0)")]
    RankDeficient,
    #[error("insufficient data: {needed} usable points required, {got} available")]
    InsufficientData { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of an iterative method, as opposed to bad input.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Error::Convergence { .. } | Error::Calibration { .. } | Error::PhaseBoundary(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
