//! Error type shared by every module of the core library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeassError {
    /// Fock space would exceed the configured mode budget.
    #[error("fock space with {modes} modes exceeds the budget of {budget} modes")]
    Size { modes: usize, budget: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    /// Input violates a structural requirement (self-adjointness, support, ...).
    #[error("validation failed: {0}")]
    Validation(String),

    /// Spectral gap closed or is not resolvable.
    #[error("gap error: {0}")]
    Gap(String),

    /// A lower expansion order was requested before it was solved.
    #[error("sequencing error: {0}")]
    Sequencing(String),

    /// Integrator step size underflow.
    #[error("stiffness: step size underflow at t = {at}; try eta >= {suggested_eta_floor:.3e}")]
    Stiffness { at: f64, suggested_eta_floor: f64 },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("fit error: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl NeassError {
    /// True for failures of the numerical environment (gap closure, stiffness)
    /// as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, NeassError::Gap(_) | NeassError::Stiffness { .. })
    }
}

pub type Result<T> = std::result::Result<T, NeassError>;
