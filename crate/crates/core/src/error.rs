//! Error type shared by every module of the laboratory.

use thiserror::Error;

/// Failure modes of the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("point outside the admissible domain: {0}")]
    OutOfDomain(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("solver diverged: {0}")]
    SolverDiverged(String),
    #[error("singular particle configuration: {0}")]
    SingularConfiguration(String),
    #[error("step size underflow: {0}")]
    StiffnessFailure(String),
    #[error("bound not applicable: {0}")]
    NotApplicable(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("time step failed: {0}")]
    StepFailure(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("scenario anomaly: {0}")]
    ScenarioAnomaly(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_order(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "fractional order s = {s} must lie in (0,1)"
        )))
    }
}
