use thiserror::Error;

use crate::solver::SolverReport;

/// Failures raised while evaluating a potential model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("singular configuration: {0}")]
    Singular(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("state has non-finite components")]
    NonFinite,
}

/// Failure of a single one-step map.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(
        "implicit solve did not converge after {} iterations (residual {:.3e}{})",
        .0.iterations,
        .0.final_residual_norm,
        .0.failure.map(|f| format!(", {f}")).unwrap_or_default()
    )]
    NotConverged(SolverReport),
    #[error("step produced non-finite state")]
    NonFinite,
    #[error("step size must be finite and non-zero, got {0}")]
    InvalidStep(f64),
    #[error("variant `{0}` is explicit and has no implicit step system")]
    NotImplicit(&'static str),
}

/// Direction of integration, used to locate reversibility failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Direction::Forward => f.write_str("forward"),
            Direction::Backward => f.write_str("backward"),
        }
    }
}

/// Errors surfaced by the trajectory driver and the diagnostics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{direction} step {step} failed: {source}")]
    Step {
        direction: Direction,
        step: usize,
        source: StepError,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
