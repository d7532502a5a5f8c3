use thiserror::Error;

use crate::numerics::Estimate;
use crate::params::ConstraintBound;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("constraint violated: {which} (rho = {rho}, sigma = {sigma})")]
    ConstraintViolation { which: ConstraintBound, rho: f64, sigma: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("subdivision limit reached (estimate {}, error {})", .best.value, .best.error)]
    MaxSubdivisions { best: Estimate },

    #[error("integrand returned a non-finite value at ({x}, {y})")]
    NonFiniteSample { x: f64, y: f64 },

    #[error("oscillatory integral did not converge (estimate {}, tail error {})", .best.value, .best.error)]
    SlowConvergence { best: Estimate },

    #[error("sigma = {0} violates 1 - sigma^2 > 0")]
    SigmaOutOfRange(f64),

    #[error("no observations supplied")]
    EmptyInput,
}

impl Error {
    /// Best-effort numerical result carried by a convergence failure.
    pub fn best_estimate(&self) -> Option<Estimate> {
        match self {
            Error::MaxSubdivisions { best } | Error::SlowConvergence { best } => Some(*best),
            _ => None,
        }
    }

    pub fn is_convergence_failure(&self) -> bool {
        self.best_estimate().is_some()
    }
}
