#![allow(dead_code)]

use conscheme::{PhaseState, PotentialModel, Vector};
use rand::Rng;

/// The model zoo used by the randomized tests. The free particle and the
/// oscillator carry non-unit masses so the mass handling is exercised.
pub fn models() -> Vec<PotentialModel> {
    vec![
        PotentialModel::free(3)
            .unwrap()
            .with_mass(Vector::from_vec(vec![1.0, 2.0, 0.5]))
            .unwrap(),
        PotentialModel::harmonic(2, 1.3)
            .unwrap()
            .with_mass(Vector::from_vec(vec![1.0, 3.0]))
            .unwrap(),
        PotentialModel::kepler(),
        PotentialModel::lennard_jones(3, 1.0, 1.0).unwrap(),
    ]
}

fn uniform_vec<R: Rng>(rng: &mut R, n: usize, half_width: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-half_width..half_width)).collect()
}

/// A state away from the model's singularities: bound, moderately eccentric
/// Kepler orbits and slightly perturbed LJ triangles.
pub fn random_state<R: Rng>(model: &PotentialModel, rng: &mut R) -> PhaseState {
    let d = model.dimension();
    match model.name() {
        "kepler" => {
            let r: f64 = rng.gen_range(0.7..1.5);
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            let speed = rng.gen_range(0.85..1.15) / r.sqrt();
            let tilt = rng.gen_range(-0.3..0.3);
            let phi = theta + std::f64::consts::FRAC_PI_2 + tilt;
            PhaseState::from_slices(
                &[r * theta.cos(), r * theta.sin()],
                &[speed * phi.cos(), speed * phi.sin()],
            )
            .unwrap()
        }
        "lj-cluster" => {
            let side = 2f64.powf(1.0 / 6.0);
            let base = [0.0, 0.0, 0.0, side, 0.0, 0.0, 0.5 * side, 0.75f64.sqrt() * side, 0.0];
            let jitter = uniform_vec(rng, 9, 0.05);
            let q: Vec<f64> = base.iter().zip(&jitter).map(|(b, j)| b + j).collect();
            PhaseState::from_slices(&q, &uniform_vec(rng, 9, 0.3)).unwrap()
        }
        _ => PhaseState::from_slices(&uniform_vec(rng, d, 2.0), &uniform_vec(rng, d, 2.0)).unwrap(),
    }
}

/// Rotation about a random axis by a random angle, as a 3x3 row-major array.
pub fn random_rotation3<R: Rng>(rng: &mut R) -> [[f64; 3]; 3] {
    let z = rng.gen_range(-1.0f64..1.0);
    let az = rng.gen_range(0.0..std::f64::consts::TAU);
    let s = (1.0 - z * z).sqrt();
    let (x, y) = (s * az.cos(), s * az.sin());
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let (c, sn) = (angle.cos(), angle.sin());
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - sn * z, t * x * z + sn * y],
        [t * x * y + sn * z, t * y * y + c, t * y * z - sn * x],
        [t * x * z - sn * y, t * y * z + sn * x, t * z * z + c],
    ]
}

/// Applies `rot` to every consecutive 3-block of `v`.
pub fn rotate_blocks(rot: &[[f64; 3]; 3], v: &Vector) -> Vector {
    let mut out = v.clone();
    for b in 0..v.len() / 3 {
        for i in 0..3 {
            out[3 * b + i] = (0..3).map(|j| rot[i][j] * v[3 * b + j]).sum();
        }
    }
    out
}

pub fn rotate2(angle: f64, v: &Vector) -> Vector {
    let (c, s) = (angle.cos(), angle.sin());
    Vector::from_vec(vec![c * v[0] - s * v[1], s * v[0] + c * v[1]])
}
