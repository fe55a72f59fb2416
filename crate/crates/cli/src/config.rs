//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # Kepler benchmark
//! model = kepler
//! scheme = s3-corrected
//! h = 0.2
//! t_end = 5000
//! ecc = 0.3
//! ```
//!
//! `#` starts a comment, vectors are comma-separated, and every key may
//! appear at most once per source. Command-line flags are a second source
//! that overrides the file.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::PathBuf;

use conscheme::model::kepler_perihelion;
use conscheme::{PhaseState, PotentialModel, SchemeVariant, SolverConfig, SolverMethod, Vector};

pub const KNOWN_KEYS: &[&str] = &[
    "model",
    "scheme",
    "h",
    "t_end",
    "q0",
    "p0",
    "ecc",
    "mass",
    "omega",
    "epsilon",
    "sigma",
    "record_stride",
    "tolerance",
    "max_iterations",
    "method",
    "output",
    "steps",
    "fd_step",
    "fd_eps",
    "energy_tol",
];

const REQUIRED_KEYS: &[&str] = &["model", "scheme", "h", "t_end"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Flag(String),
    General,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub location: Location,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.location {
            Location::Line(n) => write!(f, "line {n}: {}", self.message),
            Location::Flag(key) => write!(f, "--{}: {}", key.replace('_', "-"), self.message),
            Location::General => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    location: Location,
}

impl Entry {
    fn error(&self, message: impl Into<String>) -> ConfigError {
        ConfigError {
            location: self.location.clone(),
            message: message.into(),
        }
    }
}

/// A validated experiment with defaults applied.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: PotentialModel,
    pub scheme: SchemeVariant,
    pub h: f64,
    pub t_end: f64,
    /// `round(t_end / h)`.
    pub n_steps: usize,
    pub initial: PhaseState,
    pub record_stride: usize,
    pub solver: SolverConfig,
    pub output: Option<PathBuf>,
    pub steps: Vec<f64>,
    pub fd_step: f64,
    pub fd_eps: f64,
    pub energy_tol: f64,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_config_with_overrides(text, &[])
}

/// Parses `text`, then applies `overrides` (flag key, value) on top.
pub fn parse_config_with_overrides(
    text: &str,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig, ConfigError> {
    let mut entries = parse_entries(text)?;
    for (key, value) in overrides {
        let location = Location::Flag(key.clone());
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(ConfigError {
                location,
                message: format!("unknown key `{key}`"),
            });
        }
        entries.insert(
            key.clone(),
            Entry {
                value: value.trim().to_string(),
                location,
            },
        );
    }
    build(&entries)
}

fn parse_entries(text: &str) -> Result<HashMap<String, Entry>, ConfigError> {
    let mut entries = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ConfigError {
            location: Location::Line(line_no),
            message,
        };
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(format!("expected `key = value`, found `{line}`")));
        };
        let key = key.trim();
        let value = value.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(err(format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(err(format!("key `{key}` has no value")));
        }
        let entry = Entry {
            value: value.to_string(),
            location: Location::Line(line_no),
        };
        if let Some(prev) = entries.insert(key.to_string(), entry) {
            let first = match prev.location {
                Location::Line(n) => n,
                _ => 0,
            };
            return Err(err(format!("duplicate key `{key}` (first set on line {first})")));
        }
    }
    Ok(entries)
}

fn parse_number(entry: &Entry, key: &str) -> Result<f64, ConfigError> {
    let v: f64 = entry
        .value
        .parse()
        .map_err(|_| entry.error(format!("malformed number for `{key}`: `{}`", entry.value)))?;
    if !v.is_finite() {
        return Err(entry.error(format!("`{key}` must be finite")));
    }
    Ok(v)
}

fn parse_vector(entry: &Entry, key: &str) -> Result<Vec<f64>, ConfigError> {
    entry
        .value
        .split(',')
        .map(|part| {
            let part = part.trim();
            part.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| entry.error(format!("malformed number in `{key}`: `{part}`")))
        })
        .collect()
}

fn parse_count(entry: &Entry, key: &str) -> Result<usize, ConfigError> {
    let n: usize = entry
        .value
        .parse()
        .map_err(|_| entry.error(format!("`{key}` must be a positive integer, got `{}`", entry.value)))?;
    if n < 1 {
        return Err(entry.error(format!("`{key}` must be at least 1")));
    }
    Ok(n)
}

fn positive(entry: &Entry, key: &str) -> Result<f64, ConfigError> {
    let v = parse_number(entry, key)?;
    if v <= 0.0 {
        return Err(entry.error(format!("`{key}` must be > 0, got {v}")));
    }
    Ok(v)
}

fn build(entries: &HashMap<String, Entry>) -> Result<ExperimentConfig, ConfigError> {
    let missing: Vec<&str> = REQUIRED_KEYS
        .iter()
        .copied()
        .filter(|k| !entries.contains_key(*k))
        .collect();
    if !missing.is_empty() {
        return Err(ConfigError {
            location: Location::General,
            message: format!("missing required keys: {}", missing.join(", ")),
        });
    }
    let get = |k: &str| entries.get(k);

    let model_entry = &entries["model"];
    let model_name = model_entry.value.as_str();

    let scheme_entry = &entries["scheme"];
    let scheme = SchemeVariant::parse(&scheme_entry.value).ok_or_else(|| {
        scheme_entry.error(format!(
            "unknown scheme `{}` (expected one of verlet, s3-printed, s3-generating, s3-corrected)",
            scheme_entry.value
        ))
    })?;

    let h = positive(&entries["h"], "h")?;
    let t_end = positive(&entries["t_end"], "t_end")?;
    let n_steps = (t_end / h).round();
    if n_steps < 1.0 {
        return Err(entries["t_end"].error(format!("t_end = {t_end} is shorter than half a step")));
    }
    let n_steps = n_steps as usize;

    let mut params = BTreeMap::new();
    for key in ["omega", "epsilon", "sigma"] {
        if let Some(e) = get(key) {
            params.insert(key.to_string(), parse_number(e, key)?);
        }
    }

    let q0 = get("q0").map(|e| parse_vector(e, "q0")).transpose()?;
    let p0 = get("p0").map(|e| parse_vector(e, "p0")).transpose()?;
    let ecc = get("ecc").map(|e| parse_number(e, "ecc").map(|v| (e, v))).transpose()?;

    let initial = match (q0, ecc) {
        (Some(_), Some((e, _))) => {
            return Err(e.error("`ecc` cannot be combined with an explicit q0"));
        }
        (None, Some((e, v))) => {
            if model_name != "kepler" {
                return Err(e.error("`ecc` only applies to model kepler"));
            }
            if let Some(pe) = get("p0") {
                return Err(pe.error("`p0` cannot be combined with `ecc`"));
            }
            kepler_perihelion(v).map_err(|err| e.error(err.to_string()))?
        }
        (None, None) if model_name == "kepler" => {
            if let Some(pe) = get("p0") {
                return Err(pe.error("`p0` needs an explicit `q0`"));
            }
            kepler_perihelion(0.3).expect("default eccentricity is valid")
        }
        (None, None) => {
            return Err(ConfigError {
                location: Location::General,
                message: format!("missing required key q0 for model `{model_name}`"),
            });
        }
        (Some(q), None) => {
            let p = match p0 {
                Some(p) => p,
                None => vec![0.0; q.len()],
            };
            if p.len() != q.len() {
                return Err(get("p0").unwrap().error(format!(
                    "dimension mismatch: q0 has {} components, p0 has {}",
                    q.len(),
                    p.len()
                )));
            }
            PhaseState::from_slices(&q, &p).map_err(|err| get("q0").unwrap().error(err.to_string()))?
        }
    };

    let dim = initial.dim();
    let mut model = PotentialModel::from_name(model_name, dim, &params)
        .map_err(|err| model_entry.error(err.to_string()))?;
    if model.dimension() != dim {
        let e = get("q0").unwrap_or(model_entry);
        return Err(e.error(format!(
            "dimension mismatch: model `{model_name}` needs {} components, initial state has {dim}",
            model.dimension()
        )));
    }
    if let Some(e) = get("mass") {
        let values = parse_vector(e, "mass")?;
        let mass = match values.len() {
            1 => Vector::from_element(dim, values[0]),
            n if n == dim => Vector::from_vec(values),
            n => {
                return Err(e.error(format!(
                    "dimension mismatch: mass has {n} components, state has {dim}"
                )))
            }
        };
        model = model.with_mass(mass).map_err(|err| e.error(err.to_string()))?;
    }

    let record_stride = get("record_stride").map(|e| parse_count(e, "record_stride")).transpose()?.unwrap_or(1);
    let defaults = SolverConfig::default();
    let tolerance = get("tolerance").map(|e| positive(e, "tolerance")).transpose()?.unwrap_or(defaults.tolerance);
    let max_iterations = get("max_iterations")
        .map(|e| parse_count(e, "max_iterations"))
        .transpose()?
        .unwrap_or(defaults.max_iterations);
    let method = match get("method") {
        Some(e) => SolverMethod::parse(&e.value)
            .ok_or_else(|| e.error(format!("unknown method `{}` (newton or fixed_point)", e.value)))?,
        None => defaults.method,
    };
    let solver = SolverConfig::new(tolerance, max_iterations, method).map_err(|m| ConfigError {
        location: Location::General,
        message: m,
    })?;

    let steps = match get("steps") {
        Some(e) => {
            let s = parse_vector(e, "steps")?;
            if s.iter().any(|&v| v <= 0.0) {
                return Err(e.error("`steps` entries must be > 0"));
            }
            s
        }
        None => Vec::new(),
    };

    Ok(ExperimentConfig {
        model,
        scheme,
        h,
        t_end,
        n_steps,
        initial,
        record_stride,
        solver,
        output: get("output").map(|e| PathBuf::from(&e.value)),
        steps,
        fd_step: get("fd_step").map(|e| positive(e, "fd_step")).transpose()?.unwrap_or(1e-5),
        fd_eps: get("fd_eps").map(|e| positive(e, "fd_eps")).transpose()?.unwrap_or(1e-6),
        energy_tol: get("energy_tol").map(|e| positive(e, "energy_tol")).transpose()?.unwrap_or(0.05),
    })
}
