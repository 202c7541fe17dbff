use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("target energy {energy} outside spectrum [{min}, {max}]")]
    InfeasibleEnergy { energy: f64, min: f64, max: f64 },

    #[error("root finder did not converge after {iterations} iterations (residual {residual:e})")]
    ConvergenceError { iterations: usize, residual: f64 },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("invalid state: {0}")]
    InvalidState(String),
}

impl Error {
    /// True for failures of the numerics themselves rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::ConvergenceError { .. } | Error::InfeasibleEnergy { .. } | Error::DomainError(_))
    }

    /// Stable snake-case tag for machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::DomainError(_) => "domain_error",
            Error::InfeasibleEnergy { .. } => "infeasible_energy",
            Error::ConvergenceError { .. } => "convergence_error",
            Error::InvalidSchedule(_) => "invalid_schedule",
            Error::InvalidPerturbation(_) => "invalid_perturbation",
            Error::InvalidState(_) => "invalid_state",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
