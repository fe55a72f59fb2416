//! Phase-space state, separable Hamiltonians and the built-in potentials.
//!
//! Every model carries a constant diagonal mass vector, so the Hamiltonian is
//! `H(q, p) = ½ Σ p_i² / m_i + V(q)`. Potentials provide analytic values,
//! gradients and Hessians; [`validate_derivatives`] checks the latter two
//! against central finite differences.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::ModelError;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Position and momentum at one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    q: Vector,
    p: Vector,
}

impl PhaseState {
    pub fn new(q: Vector, p: Vector) -> Result<Self, ModelError> {
        if q.len() != p.len() {
            return Err(ModelError::DimensionMismatch {
                expected: q.len(),
                found: p.len(),
            });
        }
        if q.is_empty() {
            return Err(ModelError::InvalidParameter {
                name: "dimension".into(),
                reason: "must be at least 1".into(),
            });
        }
        let state = PhaseState { q, p };
        if !state.is_finite() {
            return Err(ModelError::NonFinite);
        }
        Ok(state)
    }

    pub fn from_slices(q: &[f64], p: &[f64]) -> Result<Self, ModelError> {
        Self::new(Vector::from_column_slice(q), Vector::from_column_slice(p))
    }

    /// Skips validation; the caller guarantees matching dimensions.
    pub(crate) fn from_parts(q: Vector, p: Vector) -> Self {
        debug_assert_eq!(q.len(), p.len());
        PhaseState { q, p }
    }

    pub fn q(&self) -> &Vector {
        &self.q
    }

    pub fn p(&self) -> &Vector {
        &self.p
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn into_parts(self) -> (Vector, Vector) {
        (self.q, self.p)
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.p.iter()).all(|v| v.is_finite())
    }

    /// Phase-space infinity norm of `self − other` over (q, p) jointly.
    pub fn distance_inf(&self, other: &PhaseState) -> f64 {
        let dq = (&self.q - &other.q).amax();
        let dp = (&self.p - &other.p).amax();
        dq.max(dp)
    }

    /// Flattened `(q, p)` coordinates of length `2d`.
    pub fn to_phase_vector(&self) -> Vector {
        let d = self.dim();
        Vector::from_fn(2 * d, |i, _| if i < d { self.q[i] } else { self.p[i - d] })
    }

    pub fn from_phase_vector(z: &Vector) -> Result<Self, ModelError> {
        if !z.len().is_multiple_of(2) {
            return Err(ModelError::DimensionMismatch {
                expected: z.len() + 1,
                found: z.len(),
            });
        }
        let d = z.len() / 2;
        Self::new(z.rows(0, d).into_owned(), z.rows(d, d).into_owned())
    }

    pub fn negate_momentum(&self) -> PhaseState {
        PhaseState::from_parts(self.q.clone(), -&self.p)
    }
}

/// Perihelion start of the unit Kepler orbit with eccentricity `e`:
/// `q = (1 − e, 0)`, `p = (0, √((1 + e)/(1 − e)))`. Energy −½, period 2π.
pub fn kepler_perihelion(e: f64) -> Result<PhaseState, ModelError> {
    if !(0.0..1.0).contains(&e) {
        return Err(invalid("ecc", "must lie in [0, 1)"));
    }
    PhaseState::from_slices(&[1.0 - e, 0.0], &[0.0, ((1.0 + e) / (1.0 - e)).sqrt()])
}

/// Kinetic, potential and total energy of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyValue {
    pub total: f64,
    pub kinetic: f64,
    pub potential: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    /// `V = 0`.
    Free,
    /// `V = ½ω²|q|²`.
    Harmonic { omega: f64 },
    /// Planar Kepler problem, `V = −1/|q|`, `d = 2`.
    Kepler,
    /// `V = Σ_{i<j} 4ε[(σ/r)¹² − (σ/r)⁶]` over particles in 3D.
    LennardJones { epsilon: f64, sigma: f64 },
}

/// A separable Hamiltonian: potential plus constant diagonal mass.
///
/// Models are immutable once built and all evaluations are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialModel {
    kind: ModelKind,
    dimension: usize,
    mass: Vector,
}

impl PotentialModel {
    pub fn free(dimension: usize) -> Result<Self, ModelError> {
        Self::with_unit_mass(ModelKind::Free, dimension)
    }

    pub fn harmonic(dimension: usize, omega: f64) -> Result<Self, ModelError> {
        if !omega.is_finite() {
            return Err(invalid("omega", "must be finite"));
        }
        Self::with_unit_mass(ModelKind::Harmonic { omega }, dimension)
    }

    pub fn kepler() -> Self {
        PotentialModel {
            kind: ModelKind::Kepler,
            dimension: 2,
            mass: Vector::from_element(2, 1.0),
        }
    }

    pub fn lennard_jones(particles: usize, epsilon: f64, sigma: f64) -> Result<Self, ModelError> {
        if particles < 1 {
            return Err(invalid("particles", "must be at least 1"));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(invalid("epsilon", "must be positive"));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(invalid("sigma", "must be positive"));
        }
        Self::with_unit_mass(ModelKind::LennardJones { epsilon, sigma }, 3 * particles)
    }

    fn with_unit_mass(kind: ModelKind, dimension: usize) -> Result<Self, ModelError> {
        if dimension == 0 {
            return Err(invalid("dimension", "must be at least 1"));
        }
        Ok(PotentialModel {
            kind,
            dimension,
            mass: Vector::from_element(dimension, 1.0),
        })
    }

    /// Builds a model from its name and a scalar parameter map.
    ///
    /// Recognized parameters: `omega` (harmonic, default 1), `epsilon` and
    /// `sigma` (lj-cluster, default 1). `dimension` is ignored for kepler and
    /// must be a multiple of 3 for lj-cluster.
    pub fn from_name(
        name: &str,
        dimension: usize,
        params: &BTreeMap<String, f64>,
    ) -> Result<Self, ModelError> {
        let allowed: &[&str] = match name {
            "free" | "kepler" => &[],
            "harmonic" => &["omega"],
            "lj-cluster" => &["epsilon", "sigma"],
            other => return Err(ModelError::UnknownModel(other.to_string())),
        };
        if let Some(key) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(invalid(key, &format!("not a parameter of model `{name}`")));
        }
        let get = |key: &str| params.get(key).copied().unwrap_or(1.0);
        match name {
            "free" => Self::free(dimension),
            "harmonic" => Self::harmonic(dimension, get("omega")),
            "kepler" => Ok(Self::kepler()),
            _ => {
                if !dimension.is_multiple_of(3) {
                    return Err(invalid("dimension", "lj-cluster needs a multiple of 3"));
                }
                Self::lennard_jones(dimension / 3, get("epsilon"), get("sigma"))
            }
        }
    }

    /// Replaces the unit mass with the given diagonal.
    pub fn with_mass(mut self, mass: Vector) -> Result<Self, ModelError> {
        if mass.len() != self.dimension {
            return Err(ModelError::DimensionMismatch {
                expected: self.dimension,
                found: mass.len(),
            });
        }
        if mass.iter().any(|&m| !(m.is_finite() && m > 0.0)) {
            return Err(invalid("mass", "entries must be positive and finite"));
        }
        self.mass = mass;
        Ok(self)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::Free => "free",
            ModelKind::Harmonic { .. } => "harmonic",
            ModelKind::Kepler => "kepler",
            ModelKind::LennardJones { .. } => "lj-cluster",
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn mass(&self) -> &Vector {
        &self.mass
    }

    pub fn parameters(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        match self.kind {
            ModelKind::Harmonic { omega } => {
                out.insert("omega".to_string(), omega);
            }
            ModelKind::LennardJones { epsilon, sigma } => {
                out.insert("epsilon".to_string(), epsilon);
                out.insert("sigma".to_string(), sigma);
            }
            ModelKind::Free | ModelKind::Kepler => {}
        }
        out
    }

    fn check_dim(&self, q: &Vector) -> Result<(), ModelError> {
        if q.len() != self.dimension {
            return Err(ModelError::DimensionMismatch {
                expected: self.dimension,
                found: q.len(),
            });
        }
        Ok(())
    }

    pub fn potential_value(&self, q: &Vector) -> Result<f64, ModelError> {
        self.check_dim(q)?;
        match self.kind {
            ModelKind::Free => Ok(0.0),
            ModelKind::Harmonic { omega } => Ok(0.5 * omega * omega * q.norm_squared()),
            ModelKind::Kepler => Ok(-1.0 / kepler_radius(q)?),
            ModelKind::LennardJones { epsilon, sigma } => {
                let lj = LjPair { epsilon, sigma };
                let mut v = 0.0;
                for (_, _, _, r) in pairs(q)? {
                    v += lj.value(r);
                }
                Ok(v)
            }
        }
    }

    pub fn potential_gradient(&self, q: &Vector) -> Result<Vector, ModelError> {
        self.check_dim(q)?;
        match self.kind {
            ModelKind::Free => Ok(Vector::zeros(self.dimension)),
            ModelKind::Harmonic { omega } => Ok(q * (omega * omega)),
            ModelKind::Kepler => {
                let r = kepler_radius(q)?;
                Ok(q / (r * r * r))
            }
            ModelKind::LennardJones { epsilon, sigma } => {
                let lj = LjPair { epsilon, sigma };
                let mut g = Vector::zeros(self.dimension);
                for (i, j, rij, r) in pairs(q)? {
                    let f = rij * (lj.first(r) / r);
                    for k in 0..3 {
                        g[3 * i + k] += f[k];
                        g[3 * j + k] -= f[k];
                    }
                }
                Ok(g)
            }
        }
    }

    /// Symmetric `d × d` Hessian of the potential.
    pub fn potential_hessian(&self, q: &Vector) -> Result<Matrix, ModelError> {
        self.check_dim(q)?;
        let d = self.dimension;
        match self.kind {
            ModelKind::Free => Ok(Matrix::zeros(d, d)),
            ModelKind::Harmonic { omega } => Ok(Matrix::identity(d, d) * (omega * omega)),
            ModelKind::Kepler => {
                let r = kepler_radius(q)?;
                let r3 = r * r * r;
                let r5 = r3 * r * r;
                Ok(Matrix::from_fn(d, d, |i, j| {
                    let diag = if i == j { 1.0 / r3 } else { 0.0 };
                    diag - 3.0 * q[i] * q[j] / r5
                }))
            }
            ModelKind::LennardJones { epsilon, sigma } => {
                let lj = LjPair { epsilon, sigma };
                let mut hess = Matrix::zeros(d, d);
                for (i, j, rij, r) in pairs(q)? {
                    let u = rij / r;
                    let radial = lj.second(r);
                    let tangential = lj.first(r) / r;
                    for a in 0..3 {
                        for b in 0..3 {
                            let id = if a == b { 1.0 } else { 0.0 };
                            let blk = radial * u[a] * u[b] + tangential * (id - u[a] * u[b]);
                            hess[(3 * i + a, 3 * i + b)] += blk;
                            hess[(3 * j + a, 3 * j + b)] += blk;
                            hess[(3 * i + a, 3 * j + b)] -= blk;
                            hess[(3 * j + a, 3 * i + b)] -= blk;
                        }
                    }
                }
                Ok(hess)
            }
        }
    }

    pub fn kinetic_energy(&self, p: &Vector) -> Result<f64, ModelError> {
        self.check_dim(p)?;
        Ok(0.5 * p.iter().zip(self.mass.iter()).map(|(pi, mi)| pi * pi / mi).sum::<f64>())
    }

    pub fn hamiltonian_energy(&self, s: &PhaseState) -> Result<EnergyValue, ModelError> {
        let kinetic = self.kinetic_energy(s.p())?;
        let potential = self.potential_value(s.q())?;
        Ok(EnergyValue {
            total: kinetic + potential,
            kinetic,
            potential,
        })
    }

    /// `M⁻¹ v`, componentwise.
    pub fn inverse_mass_times(&self, v: &Vector) -> Vector {
        v.component_div(&self.mass)
    }

    /// `M v`, componentwise.
    pub fn mass_times(&self, v: &Vector) -> Vector {
        v.component_mul(&self.mass)
    }
}

impl fmt::Display for PotentialModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(d={}", self.name(), self.dimension)?;
        for (k, v) in self.parameters() {
            write!(f, ", {k}={v}")?;
        }
        f.write_str(")")
    }
}

fn invalid(name: &str, reason: &str) -> ModelError {
    ModelError::InvalidParameter {
        name: name.to_string(),
        reason: reason.to_string(),
    }
}

fn kepler_radius(q: &Vector) -> Result<f64, ModelError> {
    let r = q.norm();
    if r == 0.0 {
        return Err(ModelError::Singular("kepler radius is zero".into()));
    }
    Ok(r)
}

type Pair = (usize, usize, nalgebra::Vector3<f64>, f64);

/// All particle pairs `(i, j, q_i − q_j, |q_i − q_j|)` with `i < j`.
fn pairs(q: &Vector) -> Result<Vec<Pair>, ModelError> {
    let n = q.len() / 3;
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let rij = nalgebra::Vector3::new(
                q[3 * i] - q[3 * j],
                q[3 * i + 1] - q[3 * j + 1],
                q[3 * i + 2] - q[3 * j + 2],
            );
            let r = rij.norm();
            if r == 0.0 {
                return Err(ModelError::Singular(format!(
                    "particles {i} and {j} coincide"
                )));
            }
            out.push((i, j, rij, r));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy)]
struct LjPair {
    epsilon: f64,
    sigma: f64,
}

impl LjPair {
    fn powers(&self, r: f64) -> (f64, f64) {
        let s6 = (self.sigma / r).powi(6);
        (s6 * s6, s6)
    }

    fn value(&self, r: f64) -> f64 {
        let (s12, s6) = self.powers(r);
        4.0 * self.epsilon * (s12 - s6)
    }

    /// dV/dr
    fn first(&self, r: f64) -> f64 {
        let (s12, s6) = self.powers(r);
        4.0 * self.epsilon * (-12.0 * s12 + 6.0 * s6) / r
    }

    /// d²V/dr²
    fn second(&self, r: f64) -> f64 {
        let (s12, s6) = self.powers(r);
        4.0 * self.epsilon * (156.0 * s12 - 42.0 * s6) / (r * r)
    }
}

/// Worst-case relative disagreement between analytic and finite-difference
/// derivatives at one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeReport {
    pub gradient_error: f64,
    pub hessian_error: f64,
}

/// Compares the analytic gradient with central differences of the value, and
/// the analytic Hessian with central differences of the gradient.
///
/// Errors are `‖analytic − fd‖∞ / (1 + ‖fd‖∞)`, taken entrywise.
pub fn validate_derivatives(
    model: &PotentialModel,
    q: &Vector,
    fd_step: f64,
) -> Result<DerivativeReport, ModelError> {
    if !(fd_step.is_finite() && fd_step > 0.0) {
        return Err(invalid("fd_step", "must be positive"));
    }
    model.check_dim(q)?;
    let d = model.dimension();
    let grad = model.potential_gradient(q)?;
    let hess = model.potential_hessian(q)?;

    let mut fd_grad = Vector::zeros(d);
    let mut fd_hess = Matrix::zeros(d, d);
    for j in 0..d {
        let mut plus = q.clone();
        let mut minus = q.clone();
        plus[j] += fd_step;
        minus[j] -= fd_step;
        fd_grad[j] =
            (model.potential_value(&plus)? - model.potential_value(&minus)?) / (2.0 * fd_step);
        let col = (model.potential_gradient(&plus)? - model.potential_gradient(&minus)?)
            / (2.0 * fd_step);
        fd_hess.set_column(j, &col);
    }
    Ok(DerivativeReport {
        gradient_error: (&grad - &fd_grad).amax() / (1.0 + fd_grad.amax()),
        hessian_error: (&hess - &fd_hess).amax() / (1.0 + fd_hess.amax()),
    })
}
