//! One-step maps and the trajectory driver.
//!
//! Velocity Verlet is the explicit baseline. The implicit schemes come from a
//! first-kind generating function built on the trapezoidal rule for the
//! potential plus a gradient end-point correction. Each one is a pair of
//! momentum relations: the first is solved for the new position, the second
//! gives the new momentum explicitly. Three coefficient sets ship:
//!
//! | variant         | first relation force terms           | second relation force terms          |
//! |-----------------|--------------------------------------|--------------------------------------|
//! | `s3-printed`    | `−(h/12)[5g(a)+g(x)] − (h/12)H(a)Δ`  | `+(h/12)[g(a)+5g(x)] − (h/12)H(x)Δ`  |
//! | `s3-generating` | `+(h/12)[7g(a)−g(x)] − (h/12)H(a)Δ`  | `+(h/12)[g(a)−7g(x)] − (h/12)H(x)Δ`  |
//! | `s3-corrected`  | `+(h/12)[5g(a)+g(x)] + (h/12)H(a)Δ`  | `−(h/12)[g(a)+5g(x)] + (h/12)H(x)Δ`  |
//!
//! with `a = q^k`, `x = q^{k+1}`, `Δ = x − a`, `g = ∇V`, `H` the Hessian of
//! `V`, and the kinetic part `MΔ/h` common to all. `s3-printed` is
//! `s3-corrected` applied to `−V`; it integrates the wrong dynamics and is
//! kept as a witness.

use std::fmt;

use crate::error::{Direction, Error, ModelError, Result, StepError};
use crate::model::{Matrix, PhaseState, PotentialModel, Vector};
use crate::solver::{solve_fixed_point, solve_newton, SolverConfig, SolverMethod, SolverReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeVariant {
    Verlet,
    S3Printed,
    S3Generating,
    S3Corrected,
}

impl SchemeVariant {
    pub const ALL: [SchemeVariant; 4] = [
        SchemeVariant::Verlet,
        SchemeVariant::S3Printed,
        SchemeVariant::S3Generating,
        SchemeVariant::S3Corrected,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.as_str() == s)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeVariant::Verlet => "verlet",
            SchemeVariant::S3Printed => "s3-printed",
            SchemeVariant::S3Generating => "s3-generating",
            SchemeVariant::S3Corrected => "s3-corrected",
        }
    }

    pub fn is_implicit(&self) -> bool {
        !matches!(self, SchemeVariant::Verlet)
    }

    fn coefficients(&self) -> Option<Coefficients> {
        let c = match self {
            SchemeVariant::Verlet => return None,
            SchemeVariant::S3Printed => Coefficients {
                start: [-5.0, -1.0, -1.0],
                end: [1.0, 5.0, -1.0],
            },
            SchemeVariant::S3Generating => Coefficients {
                start: [7.0, -1.0, -1.0],
                end: [1.0, -7.0, -1.0],
            },
            SchemeVariant::S3Corrected => Coefficients {
                start: [5.0, 1.0, 1.0],
                end: [-1.0, -5.0, 1.0],
            },
        };
        Some(c)
    }
}

impl fmt::Display for SchemeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Multipliers of `(h/12)` on `[g(a), g(x), H·Δ]` in each momentum relation.
/// The Hessian in the first relation is taken at `a`, in the second at `x`.
#[derive(Debug, Clone, Copy)]
struct Coefficients {
    start: [f64; 3],
    end: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: PhaseState,
    pub solver: SolverReport,
}

fn check_step(h: f64) -> Result<(), StepError> {
    if h.is_finite() && h != 0.0 {
        Ok(())
    } else {
        Err(StepError::InvalidStep(h))
    }
}

fn finite_state(q: Vector, p: Vector) -> Result<PhaseState, StepError> {
    let state = PhaseState::from_parts(q, p);
    if state.is_finite() {
        Ok(state)
    } else {
        Err(StepError::NonFinite)
    }
}

fn check_state(model: &PotentialModel, s: &PhaseState) -> Result<(), StepError> {
    if s.dim() != model.dimension() {
        return Err(ModelError::DimensionMismatch {
            expected: model.dimension(),
            found: s.dim(),
        }
        .into());
    }
    Ok(())
}

/// Velocity Verlet: half kick, drift, half kick.
pub fn verlet_step(model: &PotentialModel, s: &PhaseState, h: f64) -> Result<StepResult, StepError> {
    check_step(h)?;
    check_state(model, s)?;
    let p_half = s.p() - model.potential_gradient(s.q())? * (0.5 * h);
    let x = s.q() + model.inverse_mass_times(&p_half) * h;
    let p_new = &p_half - model.potential_gradient(&x)? * (0.5 * h);
    Ok(StepResult {
        state: finite_state(x, p_new)?,
        solver: SolverReport::identity(),
    })
}

/// The implicit equation for the new position of one s3 step.
///
/// Holds everything that depends only on the start point, so residual and
/// Jacobian evaluations cost one gradient or Hessian each.
#[derive(Debug, Clone)]
pub struct StepSystem<'m> {
    model: &'m PotentialModel,
    coeffs: Coefficients,
    a: Vector,
    p: Vector,
    h: f64,
    grad_a: Vector,
    hess_a: Matrix,
}

impl StepSystem<'_> {
    /// Residual of the first momentum relation at candidate position `x`.
    pub fn residual(&self, x: &Vector) -> Result<Vector, ModelError> {
        self.residual_at_increment(&(x - &self.a))
    }

    pub fn jacobian(&self, x: &Vector) -> Result<Matrix, ModelError> {
        let c = self.coeffs.start;
        let k = self.h / 12.0;
        let mut jac = self.model.potential_hessian(x)? * (c[1] * k) + &self.hess_a * (c[2] * k);
        for (i, m) in self.model.mass().iter().enumerate() {
            jac[(i, i)] += m / self.h;
        }
        Ok(jac)
    }

    /// Same residual parameterized by `Δ = x − a`, which keeps the kinetic
    /// term free of the cancellation in `x − a`.
    fn residual_at_increment(&self, delta: &Vector) -> Result<Vector, ModelError> {
        let c = self.coeffs.start;
        let k = self.h / 12.0;
        let x = &self.a + delta;
        let grad_x = self.model.potential_gradient(&x)?;
        let force = &self.grad_a * c[0] + grad_x * c[1] + &self.hess_a * delta * c[2];
        Ok(self.model.mass_times(delta) / self.h + force * k - &self.p)
    }

    /// Verlet predictor `Δ₀ = hM⁻¹p − (h²/2)M⁻¹g(a)`.
    fn predictor(&self) -> Vector {
        let h = self.h;
        self.model
            .inverse_mass_times(&(&self.p * h - &self.grad_a * (0.5 * h * h)))
    }
}

pub fn build_step_system<'m>(
    variant: SchemeVariant,
    model: &'m PotentialModel,
    s: &PhaseState,
    h: f64,
) -> Result<StepSystem<'m>, StepError> {
    let coeffs = variant
        .coefficients()
        .ok_or(StepError::NotImplicit(variant.as_str()))?;
    check_step(h)?;
    check_state(model, s)?;
    Ok(StepSystem {
        model,
        coeffs,
        a: s.q().clone(),
        p: s.p().clone(),
        h,
        grad_a: model.potential_gradient(s.q())?,
        hess_a: model.potential_hessian(s.q())?,
    })
}

/// Second momentum relation: `p^{k+1}` from the start and end positions.
pub fn s3_momentum_update(
    variant: SchemeVariant,
    model: &PotentialModel,
    a: &Vector,
    x: &Vector,
    h: f64,
) -> Result<Vector, StepError> {
    let coeffs = variant
        .coefficients()
        .ok_or(StepError::NotImplicit(variant.as_str()))?;
    check_step(h)?;
    momentum_from_increment(coeffs, model, a, &(x - a), h)
}

fn momentum_from_increment(
    coeffs: Coefficients,
    model: &PotentialModel,
    a: &Vector,
    delta: &Vector,
    h: f64,
) -> Result<Vector, StepError> {
    let c = coeffs.end;
    let k = h / 12.0;
    let x = a + delta;
    let force = model.potential_gradient(a)? * c[0]
        + model.potential_gradient(&x)? * c[1]
        + model.potential_hessian(&x)? * delta * c[2];
    Ok(model.mass_times(delta) / h + force * k)
}

/// One implicit step: solve the first relation from the Verlet predictor,
/// then apply the second.
///
/// The solve runs on the increment `Δ` with the residual divided by
/// `max(1, ‖p‖∞, ‖MΔ₀/h‖∞)`. For O(1) momenta the tolerance is therefore
/// absolute; for large momenta it is relative to the momentum scale.
pub fn s3_step(
    variant: SchemeVariant,
    model: &PotentialModel,
    s: &PhaseState,
    h: f64,
    cfg: &SolverConfig,
) -> Result<StepResult, StepError> {
    let sys = build_step_system(variant, model, s, h)?;
    let delta0 = sys.predictor();
    let scale = 1f64
        .max(s.p().amax())
        .max((model.mass_times(&delta0) / h).amax());

    let (delta, report) = match cfg.method {
        SolverMethod::Newton => solve_newton(
            |d: &Vector| sys.residual_at_increment(d).map(|r| r / scale),
            |d: &Vector| sys.jacobian(&(&sys.a + d)).map(|j| j / scale),
            delta0,
            cfg,
        )?,
        SolverMethod::FixedPoint => solve_fixed_point(
            |d: &Vector| {
                let r = sys.residual_at_increment(d)?;
                Ok::<_, ModelError>(d - model.inverse_mass_times(&r) * h)
            },
            delta0,
            cfg,
        )?,
    };
    if !report.converged {
        return Err(StepError::NotConverged(report));
    }
    let p_new = momentum_from_increment(sys.coeffs, model, &sys.a, &delta, h)?;
    Ok(StepResult {
        state: finite_state(&sys.a + delta, p_new)?,
        solver: report,
    })
}

/// Dispatches to the explicit or implicit step for `variant`.
pub fn step(
    variant: SchemeVariant,
    model: &PotentialModel,
    s: &PhaseState,
    h: f64,
    cfg: &SolverConfig,
) -> Result<StepResult, StepError> {
    match variant {
        SchemeVariant::Verlet => verlet_step(model, s, h),
        _ => s3_step(variant, model, s, h, cfg),
    }
}

/// Sign of the gradient-correction term in the generating function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectionSign {
    /// `−(h/12)[g(x) − g(a)]·Δ`; its derivatives give `s3-generating`.
    Minus,
    /// `+(h/12)[g(x) − g(a)]·Δ`; its derivatives give `s3-corrected`.
    Plus,
}

/// First-kind generating function
/// `S(a, x) = ΔᵀMΔ/(2h) − (h/2)[V(a) + V(x)] ∓ (h/12)[g(x) − g(a)]·Δ`.
///
/// Only used to cross-check the momentum relations by differentiation:
/// `p^k = −∂S/∂a`, `p^{k+1} = ∂S/∂x`.
pub fn generating_function(
    model: &PotentialModel,
    a: &Vector,
    x: &Vector,
    h: f64,
    sign: CorrectionSign,
) -> Result<f64, ModelError> {
    let delta = x - a;
    let kinetic = delta.dot(&model.mass_times(&delta)) / (2.0 * h);
    let trapezoid = 0.5 * h * (model.potential_value(a)? + model.potential_value(x)?);
    let correction =
        h / 12.0 * (model.potential_gradient(x)? - model.potential_gradient(a)?).dot(&delta);
    Ok(match sign {
        CorrectionSign::Minus => kinetic - trapezoid - correction,
        CorrectionSign::Plus => kinetic - trapezoid + correction,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub model: String,
    pub variant: SchemeVariant,
    pub h: f64,
    pub n_steps: usize,
    pub record_stride: usize,
    pub initial_energy: f64,
}

/// Step at which integration stopped and why.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFailure {
    /// 1-based index of the step that failed.
    pub step: usize,
    pub error: StepError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    pub meta: TrajectoryMeta,
    pub failure: Option<StepFailure>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> Option<&PhaseState> {
        self.states.last()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, PhaseState::dim)
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }
}

/// Applies the one-step map `n_steps` times, recording the start and every
/// `record_stride`-th state.
///
/// A failing step ends the run; the records up to that point are kept and
/// the failure is attached to the returned trajectory.
pub fn integrate(
    model: &PotentialModel,
    variant: SchemeVariant,
    s0: &PhaseState,
    h: f64,
    n_steps: usize,
    record_stride: usize,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    if n_steps < 1 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    if record_stride < 1 {
        return Err(Error::InvalidArgument("record_stride must be at least 1".into()));
    }
    if !(h.is_finite() && h != 0.0) {
        return Err(Error::InvalidArgument(format!("step size must be non-zero, got {h}")));
    }
    if s0.dim() != model.dimension() {
        return Err(ModelError::DimensionMismatch {
            expected: model.dimension(),
            found: s0.dim(),
        }
        .into());
    }
    let initial_energy = model.hamiltonian_energy(s0)?.total;
    let capacity = n_steps / record_stride + 1;
    let mut times = Vec::with_capacity(capacity);
    let mut states = Vec::with_capacity(capacity);
    times.push(0.0);
    states.push(s0.clone());

    let mut failure = None;
    let mut current = s0.clone();
    for k in 1..=n_steps {
        match step(variant, model, &current, h, cfg) {
            Ok(res) => current = res.state,
            Err(error) => {
                failure = Some(StepFailure { step: k, error });
                break;
            }
        }
        if k % record_stride == 0 {
            times.push(k as f64 * h);
            states.push(current.clone());
        }
    }
    Ok(Trajectory {
        times,
        states,
        meta: TrajectoryMeta {
            model: model.name().to_string(),
            variant,
            h,
            n_steps,
            record_stride,
            initial_energy,
        },
        failure,
    })
}

/// Runs `n_steps` steps without recording, returning the final state.
pub fn propagate(
    model: &PotentialModel,
    variant: SchemeVariant,
    s0: &PhaseState,
    h: f64,
    n_steps: usize,
    cfg: &SolverConfig,
    direction: Direction,
) -> Result<PhaseState> {
    let mut current = s0.clone();
    for k in 1..=n_steps {
        current = step(variant, model, &current, h, cfg)
            .map_err(|source| Error::Step {
                direction,
                step: k,
                source,
            })?
            .state;
    }
    Ok(current)
}
