//! Conservation, reversibility, symplecticity and convergence-order checks.

use crate::error::{Direction, Error, ModelError, Result};
use crate::integrators::{propagate, step, SchemeVariant, Trajectory};
use crate::model::{Matrix, ModelKind, PhaseState, PotentialModel, Vector};
use crate::solver::SolverConfig;

/// `H(t) − H(0)` along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub max_abs: f64,
    /// Over records `[0, n/2)`.
    pub max_abs_first_half: f64,
    /// Over records `[n/2, n)`.
    pub max_abs_second_half: f64,
}

impl DriftSeries {
    pub fn from_values(times: Vec<f64>, values: Vec<f64>) -> Self {
        let max_abs_of = |xs: &[f64]| xs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mid = values.len() / 2;
        DriftSeries {
            max_abs: max_abs_of(&values),
            max_abs_first_half: max_abs_of(&values[..mid]),
            max_abs_second_half: max_abs_of(&values[mid..]),
            times,
            values,
        }
    }

    /// No secular growth: the late half stays within `factor` times the
    /// early half.
    pub fn is_bounded(&self, factor: f64) -> bool {
        self.max_abs_second_half <= factor * self.max_abs_first_half
    }
}

pub fn energy_drift(traj: &Trajectory, model: &PotentialModel) -> Result<DriftSeries> {
    let Some(first) = traj.states.first() else {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    };
    let h0 = model.hamiltonian_energy(first)?.total;
    let values = traj
        .states
        .iter()
        .map(|s| model.hamiltonian_energy(s).map(|e| e.total - h0))
        .collect::<Result<Vec<_>, ModelError>>()?;
    Ok(DriftSeries::from_values(traj.times.clone(), values))
}

/// Integrates `n_steps` forward with `h`, then `n_steps` back with `−h`, and
/// returns the phase-space infinity-norm distance to the start.
pub fn reversibility_error(
    variant: SchemeVariant,
    model: &PotentialModel,
    s0: &PhaseState,
    h: f64,
    n_steps: usize,
    cfg: &SolverConfig,
) -> Result<f64> {
    let there = propagate(model, variant, s0, h, n_steps, cfg, Direction::Forward)?;
    let back = propagate(model, variant, &there, -h, n_steps, cfg, Direction::Backward)?;
    Ok(back.distance_inf(s0))
}

/// Standard symplectic form `[[0, I], [−I, 0]]` of size `2d`.
pub fn symplectic_form(d: usize) -> Matrix {
    let mut omega = Matrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        omega[(i, d + i)] = 1.0;
        omega[(d + i, i)] = -1.0;
    }
    omega
}

/// Central-difference Jacobian of a phase-space map over `(q, p)`.
pub fn map_jacobian<F>(mut map: F, s: &PhaseState, fd_eps: f64) -> Result<Matrix>
where
    F: FnMut(&PhaseState) -> Result<PhaseState>,
{
    if !(fd_eps.is_finite() && fd_eps > 0.0) {
        return Err(Error::InvalidArgument(format!("fd_eps must be positive, got {fd_eps}")));
    }
    let z = s.to_phase_vector();
    let n = z.len();
    let mut jac = Matrix::zeros(n, n);
    for j in 0..n {
        let mut plus = z.clone();
        let mut minus = z.clone();
        plus[j] += fd_eps;
        minus[j] -= fd_eps;
        let fp = map(&PhaseState::from_phase_vector(&plus)?)?.to_phase_vector();
        let fm = map(&PhaseState::from_phase_vector(&minus)?)?.to_phase_vector();
        jac.set_column(j, &((fp - fm) / (2.0 * fd_eps)));
    }
    Ok(jac)
}

/// `‖JᵀΩJ − Ω‖∞` (maximum absolute row sum).
pub fn symplectic_defect_of_jacobian(jac: &Matrix) -> f64 {
    let omega = symplectic_form(jac.nrows() / 2);
    let defect = jac.transpose() * &omega * jac - omega;
    defect
        .row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Symplecticity defect of an arbitrary phase-space map at `s`.
pub fn map_symplecticity_defect<F>(map: F, s: &PhaseState, fd_eps: f64) -> Result<f64>
where
    F: FnMut(&PhaseState) -> Result<PhaseState>,
{
    Ok(symplectic_defect_of_jacobian(&map_jacobian(map, s, fd_eps)?))
}

/// Symplecticity defect of one step of `variant` at `s`.
pub fn symplecticity_defect(
    variant: SchemeVariant,
    model: &PotentialModel,
    s: &PhaseState,
    h: f64,
    fd_eps: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    map_symplecticity_defect(
        |z| {
            step(variant, model, z, h, cfg)
                .map(|r| r.state)
                .map_err(|source| Error::Step {
                    direction: Direction::Forward,
                    step: 1,
                    source,
                })
        },
        s,
        fd_eps,
    )
}

/// Global errors at a fixed final time and their fitted log-log slope.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderEstimate {
    pub step_sizes: Vec<f64>,
    pub global_errors: Vec<f64>,
    pub fitted_order: f64,
    /// Errors decrease strictly with the step size. When false the reference
    /// is likely too coarse or the study is roundoff-limited.
    pub monotone: bool,
}

impl OrderEstimate {
    pub fn from_errors(step_sizes: Vec<f64>, global_errors: Vec<f64>) -> Result<Self> {
        if step_sizes.len() != global_errors.len() || step_sizes.len() < 2 {
            return Err(Error::InvalidArgument(
                "need at least two (step size, error) pairs".into(),
            ));
        }
        if step_sizes.iter().chain(&global_errors).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument(
                "step sizes and errors must be positive and finite".into(),
            ));
        }
        let fitted_order = fit_order(&step_sizes, &global_errors);
        let mut pairs: Vec<(f64, f64)> =
            step_sizes.iter().copied().zip(global_errors.iter().copied()).collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let monotone = pairs.windows(2).all(|w| w[1].1 < w[0].1);
        Ok(OrderEstimate {
            step_sizes,
            global_errors,
            fitted_order,
            monotone,
        })
    }
}

/// Least-squares slope of `ln(error)` against `ln(h)`.
pub fn fit_order(step_sizes: &[f64], errors: &[f64]) -> f64 {
    let n = step_sizes.len() as f64;
    let xs: Vec<f64> = step_sizes.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Where the "true" state at the final time comes from.
pub enum Reference<'a> {
    /// Exact flow `t ↦ state`.
    Analytic(&'a dyn Fn(f64) -> PhaseState),
    /// A previously computed trajectory that contains a record at `T`.
    Trajectory(&'a Trajectory),
    /// A fresh run of `variant` at step `h`, which must be at most 1/20 of the
    /// finest step under study.
    Run { variant: SchemeVariant, h: f64 },
}

fn steps_for(t_end: f64, h: f64) -> Result<usize> {
    let ratio = t_end / h;
    let n = ratio.round();
    if !(h > 0.0 && n >= 1.0 && (ratio - n).abs() <= 1e-9 * ratio.max(1.0)) {
        return Err(Error::InvalidArgument(format!(
            "step size {h} does not divide T = {t_end}"
        )));
    }
    Ok(n as usize)
}

/// Measures the global error at `t_end` for each step size and fits the
/// order.
pub fn convergence_order(
    variant: SchemeVariant,
    model: &PotentialModel,
    s0: &PhaseState,
    t_end: f64,
    step_sizes: &[f64],
    reference: Reference<'_>,
    cfg: &SolverConfig,
) -> Result<OrderEstimate> {
    if step_sizes.len() < 2 {
        return Err(Error::InvalidArgument("need at least two step sizes".into()));
    }
    let counts = step_sizes
        .iter()
        .map(|&h| steps_for(t_end, h))
        .collect::<Result<Vec<_>>>()?;
    let exact = match reference {
        Reference::Analytic(flow) => flow(t_end),
        Reference::Trajectory(traj) => traj
            .times
            .iter()
            .position(|t| (t - t_end).abs() <= 1e-9 * t_end.abs().max(1.0))
            .map(|i| traj.states[i].clone())
            .ok_or_else(|| {
                Error::InvalidArgument(format!("reference trajectory has no record at T = {t_end}"))
            })?,
        Reference::Run { variant: rv, h } => {
            let finest = step_sizes.iter().copied().fold(f64::INFINITY, f64::min);
            if h > finest / 20.0 * (1.0 + 1e-12) {
                return Err(Error::InvalidArgument(format!(
                    "reference step {h} must be at most {}",
                    finest / 20.0
                )));
            }
            let n = steps_for(t_end, h)?;
            propagate(model, rv, s0, h, n, cfg, Direction::Forward)?
        }
    };
    let mut errors = Vec::with_capacity(step_sizes.len());
    for (&h, &n) in step_sizes.iter().zip(&counts) {
        let end = propagate(model, variant, s0, h, n, cfg, Direction::Forward)?;
        errors.push(end.distance_inf(&exact));
    }
    OrderEstimate::from_errors(step_sizes.to_vec(), errors)
}

/// Exact flow from `s0` where one is known in closed form: the free
/// particle, the harmonic oscillator, and circular Kepler orbits.
pub fn exact_flow(
    model: &PotentialModel,
    s0: &PhaseState,
) -> Option<Box<dyn Fn(f64) -> PhaseState + Send + Sync>> {
    if s0.dim() != model.dimension() {
        return None;
    }
    let q0 = s0.q().clone();
    let p0 = s0.p().clone();
    let mass = model.mass().clone();
    match model.kind() {
        ModelKind::Free => Some(Box::new(move |t| {
            PhaseState::new(&q0 + p0.component_div(&mass) * t, p0.clone())
                .expect("finite free flow")
        })),
        ModelKind::Harmonic { omega } => Some(Box::new(move |t| {
            let d = q0.len();
            let mut q = Vector::zeros(d);
            let mut p = Vector::zeros(d);
            for i in 0..d {
                let m = mass[i];
                if omega == 0.0 {
                    q[i] = q0[i] + p0[i] / m * t;
                    p[i] = p0[i];
                    continue;
                }
                let w = omega.abs() / m.sqrt();
                let (sin, cos) = (w * t).sin_cos();
                q[i] = q0[i] * cos + p0[i] / (m * w) * sin;
                p[i] = p0[i] * cos - m * w * q0[i] * sin;
            }
            PhaseState::new(q, p).expect("finite oscillator flow")
        })),
        ModelKind::Kepler => {
            let r = q0.norm();
            let radial = q0.dot(&p0);
            let ang = q0[0] * p0[1] - q0[1] * p0[0];
            let circular = r > 0.0
                && radial.abs() <= 1e-12
                && (p0.norm_squared() * r - 1.0).abs() <= 1e-12;
            if !circular {
                return None;
            }
            let rate = ang / (r * r);
            Some(Box::new(move |t| {
                let (sin, cos) = (rate * t).sin_cos();
                let rot = |v: &Vector| Vector::from_column_slice(&[
                    cos * v[0] - sin * v[1],
                    sin * v[0] + cos * v[1],
                ]);
                PhaseState::new(rot(&q0), rot(&p0)).expect("finite circular orbit")
            }))
        }
        ModelKind::LennardJones { .. } => None,
    }
}

/// `L = q₁p₂ − q₂p₁` per record of a planar trajectory.
pub fn angular_momentum_series(traj: &Trajectory) -> Result<Vec<f64>> {
    if traj.dim() != 2 {
        return Err(Error::InvalidArgument(format!(
            "angular momentum needs dimension 2, trajectory has {}",
            traj.dim()
        )));
    }
    Ok(traj
        .states
        .iter()
        .map(|s| s.q()[0] * s.p()[1] - s.q()[1] * s.p()[0])
        .collect())
}
