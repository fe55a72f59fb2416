//! Dense Newton and fixed-point iteration for the per-step implicit equation.
//!
//! Both solvers test convergence on the infinity norm of the quantity they
//! drive to zero and return the best iterate seen when they give up. The
//! supplied procedures may fail with their own error type, which is passed
//! through untouched.

use std::fmt;

use crate::model::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMethod {
    #[default]
    Newton,
    FixedPoint,
}

impl SolverMethod {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "newton" => Some(SolverMethod::Newton),
            "fixed_point" | "fixed-point" => Some(SolverMethod::FixedPoint),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SolverMethod::Newton => "newton",
            SolverMethod::FixedPoint => "fixed_point",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub method: SolverMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-13,
            max_iterations: 50,
            method: SolverMethod::Newton,
        }
    }
}

impl SolverConfig {
    pub fn new(tolerance: f64, max_iterations: usize, method: SolverMethod) -> Result<Self, String> {
        if !(tolerance.is_finite() && tolerance > 0.0) {
            return Err(format!("tolerance must be positive, got {tolerance}"));
        }
        if max_iterations < 1 {
            return Err("max_iterations must be at least 1".to_string());
        }
        Ok(SolverConfig {
            tolerance,
            max_iterations,
            method,
        })
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }
}

/// Why a solve stopped without converging.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverFailure {
    MaxIterations,
    SingularJacobian,
    NonFinite,
}

impl fmt::Display for SolverFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverFailure::MaxIterations => "iteration limit reached",
            SolverFailure::SingularJacobian => "singular jacobian",
            SolverFailure::NonFinite => "non-finite residual",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_residual_norm: f64,
    pub failure: Option<SolverFailure>,
}

impl SolverReport {
    /// Report attached to explicit steps, which solve nothing.
    pub fn identity() -> Self {
        SolverReport {
            converged: true,
            iterations: 0,
            final_residual_norm: 0.0,
            failure: None,
        }
    }

    fn failed(iterations: usize, residual: f64, cause: SolverFailure) -> Self {
        SolverReport {
            converged: false,
            iterations,
            final_residual_norm: residual,
            failure: Some(cause),
        }
    }
}

/// Keeps the iterate with the smallest residual norm.
struct Best {
    x: Vector,
    norm: f64,
}

impl Best {
    fn offer(&mut self, x: &Vector, norm: f64) {
        if norm < self.norm {
            self.x.clone_from(x);
            self.norm = norm;
        }
    }
}

/// Newton iteration `x ← x + δ` with `J(x) δ = −R(x)` solved by dense LU.
pub fn solve_newton<R, J, E>(
    mut residual: R,
    mut jacobian: J,
    x0: Vector,
    cfg: &SolverConfig,
) -> Result<(Vector, SolverReport), E>
where
    R: FnMut(&Vector) -> Result<Vector, E>,
    J: FnMut(&Vector) -> Result<Matrix, E>,
{
    let mut x = x0;
    let mut best = Best {
        x: x.clone(),
        norm: f64::INFINITY,
    };
    let mut iterations = 0;
    loop {
        let r = residual(&x)?;
        let norm = r.amax();
        if !r.iter().all(|v| v.is_finite()) {
            let report = SolverReport::failed(iterations, best.norm, SolverFailure::NonFinite);
            return Ok((best.x, report));
        }
        best.offer(&x, norm);
        if norm <= cfg.tolerance {
            let report = SolverReport {
                converged: true,
                iterations,
                final_residual_norm: norm,
                failure: None,
            };
            return Ok((x, report));
        }
        if iterations >= cfg.max_iterations {
            let report = SolverReport::failed(iterations, best.norm, SolverFailure::MaxIterations);
            return Ok((best.x, report));
        }
        let jac = jacobian(&x)?;
        let Some(delta) = jac.lu().solve(&(-r)) else {
            let report =
                SolverReport::failed(iterations, best.norm, SolverFailure::SingularJacobian);
            return Ok((best.x, report));
        };
        x += delta;
        iterations += 1;
    }
}

/// Fixed-point iteration `x ← map(x)` until `‖map(x) − x‖∞ ≤ tolerance`.
///
/// Convergence is checked before each update, so an exact fixed point
/// returns immediately with zero iterations.
pub fn solve_fixed_point<F, E>(
    mut map: F,
    x0: Vector,
    cfg: &SolverConfig,
) -> Result<(Vector, SolverReport), E>
where
    F: FnMut(&Vector) -> Result<Vector, E>,
{
    let mut x = x0;
    let mut best = Best {
        x: x.clone(),
        norm: f64::INFINITY,
    };
    let mut iterations = 0;
    loop {
        let next = map(&x)?;
        let norm = (&next - &x).amax();
        if !norm.is_finite() {
            let report = SolverReport::failed(iterations, best.norm, SolverFailure::NonFinite);
            return Ok((best.x, report));
        }
        best.offer(&x, norm);
        if norm <= cfg.tolerance {
            let report = SolverReport {
                converged: true,
                iterations,
                final_residual_norm: norm,
                failure: None,
            };
            return Ok((x, report));
        }
        if iterations >= cfg.max_iterations {
            let report = SolverReport::failed(iterations, best.norm, SolverFailure::MaxIterations);
            return Ok((best.x, report));
        }
        x = next;
        iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn scalar(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    fn cfg(tol: f64, max_iterations: usize) -> SolverConfig {
        SolverConfig::new(tol, max_iterations, SolverMethod::Newton).unwrap()
    }

    #[test]
    fn newton_linear_residual_takes_one_step() {
        let (x, rep) = solve_newton::<_, _, Infallible>(
            |x| Ok(x * 2.0 - scalar(4.0)),
            |_| Ok(Matrix::from_element(1, 1, 2.0)),
            scalar(0.0),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(x[0], 2.0);
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
    }

    #[test]
    fn newton_square_root_iterates() {
        let mut seen = Vec::new();
        let (x, rep) = solve_newton::<_, _, Infallible>(
            |x| {
                seen.push(x[0]);
                Ok(scalar(x[0] * x[0] - 4.0))
            },
            |x| Ok(Matrix::from_element(1, 1, 2.0 * x[0])),
            scalar(3.0),
            &cfg(1e-12, 50),
        )
        .unwrap();
        assert!(rep.converged);
        assert!((x[0] - 2.0).abs() <= 1e-12);
        assert_eq!(seen[0], 3.0);
        // 3 − 5/6 and the next hand iterate
        assert!((seen[1] - 13.0 / 6.0).abs() < 1e-15);
        assert!((seen[2] - 2.006410256410256).abs() < 1e-14);
    }

    #[test]
    fn newton_already_converged_returns_start() {
        let (x, rep) = solve_newton::<_, _, Infallible>(
            |x| Ok(x * 2.0 - scalar(4.0)),
            |_| Ok(Matrix::from_element(1, 1, 2.0)),
            scalar(2.0),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(x[0], 2.0);
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged);
    }

    #[test]
    fn newton_singular_jacobian_is_distinct_failure() {
        let (x, rep) = solve_newton::<_, _, Infallible>(
            |x| Ok(scalar(x[0] * x[0] + 1.0)),
            |_| Ok(Matrix::zeros(1, 1)),
            scalar(0.0),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.failure, Some(SolverFailure::SingularJacobian));
        assert_eq!(x[0], 0.0);
    }

    #[test]
    fn newton_non_finite_residual_fails_immediately() {
        let (_, rep) = solve_newton::<_, _, Infallible>(
            |_| Ok(scalar(f64::NAN)),
            |_| Ok(Matrix::identity(1, 1)),
            scalar(1.0),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(rep.failure, Some(SolverFailure::NonFinite));
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn newton_iteration_limit() {
        // x² + 1 has no real root; Newton wanders
        let (_, rep) = solve_newton::<_, _, Infallible>(
            |x| Ok(scalar(x[0] * x[0] + 1.0)),
            |x| Ok(Matrix::from_element(1, 1, 2.0 * x[0])),
            scalar(0.5),
            &cfg(1e-12, 10),
        )
        .unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.failure, Some(SolverFailure::MaxIterations));
        assert_eq!(rep.iterations, 10);
        assert!(rep.final_residual_norm >= 1.0);
    }

    #[test]
    fn newton_propagates_procedure_errors() {
        let out = solve_newton(
            |_| Err("boom"),
            |_| Ok(Matrix::identity(1, 1)),
            scalar(0.0),
            &SolverConfig::default(),
        );
        assert_eq!(out.unwrap_err(), "boom");
    }

    #[test]
    fn fixed_point_identity_map() {
        let (x, rep) =
            solve_fixed_point::<_, Infallible>(|x| Ok(x.clone()), scalar(0.3), &cfg(1e-10, 50))
                .unwrap();
        assert_eq!(x[0], 0.3);
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged);
    }

    #[test]
    fn fixed_point_contraction() {
        let (x, rep) = solve_fixed_point::<_, Infallible>(
            |x| Ok(x / 2.0 + scalar(1.0)),
            scalar(0.0),
            &cfg(1e-10, 100),
        )
        .unwrap();
        assert!(rep.converged);
        assert!((x[0] - 2.0).abs() <= 2e-10);
        assert!(rep.final_residual_norm <= 1e-10);
    }

    #[test]
    fn fixed_point_expanding_map_does_not_converge() {
        let (_, rep) = solve_fixed_point::<_, Infallible>(
            |x| Ok(x * 2.0 + scalar(1.0)),
            scalar(0.0),
            &cfg(1e-10, 20),
        )
        .unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.failure, Some(SolverFailure::MaxIterations));
    }

    #[test]
    fn fixed_point_non_finite() {
        let (_, rep) = solve_fixed_point::<_, Infallible>(
            |_| Ok(scalar(f64::INFINITY)),
            scalar(0.0),
            &cfg(1e-10, 20),
        )
        .unwrap();
        assert_eq!(rep.failure, Some(SolverFailure::NonFinite));
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(0.0, 10, SolverMethod::Newton).is_err());
        assert!(SolverConfig::new(1e-10, 0, SolverMethod::Newton).is_err());
        let d = SolverConfig::default();
        assert_eq!((d.tolerance, d.max_iterations, d.method), (1e-13, 50, SolverMethod::Newton));
    }
}
