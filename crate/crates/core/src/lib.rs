//! Conservative difference schemes for separable Hamiltonian systems.
//!
//! The crate provides the built-in potential models ([`model`]), a dense
//! Newton / fixed-point solver for implicit steps ([`solver`]), velocity
//! Verlet and the generating-function schemes ([`integrators`]), and
//! conservation, reversibility, symplecticity and convergence diagnostics
//! ([`diagnostics`]).

pub mod diagnostics;
pub mod error;
pub mod integrators;
pub mod model;
pub mod solver;

pub use error::{Direction, Error, ModelError, Result, StepError};
pub use integrators::{
    integrate, s3_step, step, verlet_step, SchemeVariant, StepResult, Trajectory,
};
pub use model::{EnergyValue, Matrix, PhaseState, PotentialModel, Vector};
pub use solver::{SolverConfig, SolverMethod, SolverReport};
