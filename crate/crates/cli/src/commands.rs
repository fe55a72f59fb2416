//! The `run`, `compare`, `converge` and `check` commands.
//!
//! Exit codes: 0 ok, 1 usage, 2 solver failure, 3 I/O, 4 diagnostic
//! inconsistency.

use std::fmt;
use std::io::{self, Write};
use std::time::Instant;

use conscheme::diagnostics::{
    convergence_order, energy_drift, exact_flow, reversibility_error, symplecticity_defect,
    OrderEstimate, Reference,
};
use conscheme::integrators::integrate;
use conscheme::model::validate_derivatives;
use conscheme::{Error, SchemeVariant, Trajectory};

use crate::config::ExperimentConfig;
use crate::output::{fmt_f64, write_atomic, write_trajectory_csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DIAGNOSTIC: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Solver(String),
    Io(String),
    Diagnostic(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Solver(_) => EXIT_SOLVER,
            CliError::Io(_) => EXIT_IO,
            CliError::Diagnostic(_) => EXIT_DIAGNOSTIC,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Diagnostic(m) => write!(f, "diagnostic: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Errors before the first step are configuration problems; step failures
/// are solver failures.
fn classify(e: Error) -> CliError {
    match e {
        Error::Step { .. } => CliError::Solver(e.to_string()),
        Error::Model(_) | Error::InvalidArgument(_) => CliError::Usage(e.to_string()),
    }
}

/// Writes to the configured output file atomically, or to `stdout`.
fn emit<F>(cfg: &ExperimentConfig, stdout: &mut dyn Write, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match &cfg.output {
        Some(path) => write_atomic(path, fill)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => fill(stdout).map_err(CliError::from),
    }
}

fn run_trajectory(cfg: &ExperimentConfig, variant: SchemeVariant) -> Result<Trajectory, CliError> {
    integrate(
        &cfg.model,
        variant,
        &cfg.initial,
        cfg.h,
        cfg.n_steps,
        cfg.record_stride,
        &cfg.solver,
    )
    .map_err(classify)
}

pub fn cmd_run(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let traj = run_trajectory(cfg, cfg.scheme)?;
    emit(cfg, stdout, |w| write_trajectory_csv(w, &traj, &cfg.model))?;
    match &traj.failure {
        Some(f) => Err(CliError::Solver(format!("step {} failed: {}", f.step, f.error))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantSummary {
    pub variant: SchemeVariant,
    pub max_abs_drift: f64,
    pub max_abs_first_half: f64,
    pub max_abs_second_half: f64,
    pub reversibility_error: f64,
    pub wall_seconds: f64,
}

/// Baseline (Verlet) against the configured scheme at identical settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSummary {
    pub baseline: VariantSummary,
    pub candidate: VariantSummary,
    /// candidate / baseline max drift; NaN for 0/0.
    pub drift_ratio: f64,
}

impl ComparisonSummary {
    pub fn write_csv(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(
            w,
            "variant,max_abs_drift,max_abs_first_half,max_abs_second_half,reversibility_error,wall_seconds"
        )?;
        for s in [&self.baseline, &self.candidate] {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                s.variant,
                fmt_f64(s.max_abs_drift),
                fmt_f64(s.max_abs_first_half),
                fmt_f64(s.max_abs_second_half),
                fmt_f64(s.reversibility_error),
                fmt_f64(s.wall_seconds)
            )?;
        }
        writeln!(w, "drift_ratio,{}", fmt_f64(self.drift_ratio))
    }

    pub fn write_table(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(
            w,
            "{:<14} {:>14} {:>14} {:>14} {:>12}",
            "variant", "max |dH|", "reversibility", "late/early", "seconds"
        )?;
        for s in [&self.baseline, &self.candidate] {
            let growth = s.max_abs_second_half / s.max_abs_first_half;
            writeln!(
                w,
                "{:<14} {:>14.6e} {:>14.6e} {:>14.4} {:>12.3}",
                s.variant.as_str(),
                s.max_abs_drift,
                s.reversibility_error,
                growth,
                s.wall_seconds
            )?;
        }
        writeln!(w, "drift ratio ({} / verlet): {}", self.candidate.variant, fmt_ratio(self.drift_ratio))
    }
}

fn fmt_ratio(r: f64) -> String {
    if r.is_nan() {
        "nan".into()
    } else {
        format!("{r:.6}")
    }
}

fn summarize(cfg: &ExperimentConfig, variant: SchemeVariant) -> Result<VariantSummary, CliError> {
    let start = Instant::now();
    let traj = run_trajectory(cfg, variant)?;
    let wall_seconds = start.elapsed().as_secs_f64();
    if let Some(f) = &traj.failure {
        return Err(CliError::Solver(format!("{variant}: step {} failed: {}", f.step, f.error)));
    }
    let drift = energy_drift(&traj, &cfg.model).map_err(classify)?;
    let rev = reversibility_error(variant, &cfg.model, &cfg.initial, cfg.h, cfg.n_steps, &cfg.solver)
        .map_err(classify)?;
    Ok(VariantSummary {
        variant,
        max_abs_drift: drift.max_abs,
        max_abs_first_half: drift.max_abs_first_half,
        max_abs_second_half: drift.max_abs_second_half,
        reversibility_error: rev,
        wall_seconds,
    })
}

pub fn compare(cfg: &ExperimentConfig) -> Result<ComparisonSummary, CliError> {
    let (baseline, candidate) = std::thread::scope(|scope| {
        let b = scope.spawn(|| summarize(cfg, SchemeVariant::Verlet));
        let c = summarize(cfg, cfg.scheme);
        (b.join().expect("baseline run panicked"), c)
    });
    let baseline = baseline?;
    let candidate = candidate?;
    let drift_ratio = candidate.max_abs_drift / baseline.max_abs_drift;
    Ok(ComparisonSummary {
        baseline,
        candidate,
        drift_ratio,
    })
}

pub fn cmd_compare(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let summary = compare(cfg)?;
    summary.write_table(stdout)?;
    if cfg.output.is_none() {
        writeln!(stdout)?;
    }
    emit(cfg, stdout, |w| summary.write_csv(w))
}

pub fn converge(cfg: &ExperimentConfig) -> Result<OrderEstimate, CliError> {
    if cfg.steps.len() < 2 {
        return Err(CliError::Usage(format!(
            "converge needs at least two step sizes in `steps`, got {}",
            cfg.steps.len()
        )));
    }
    let flow = exact_flow(&cfg.model, &cfg.initial);
    let reference = match &flow {
        Some(f) => Reference::Analytic(&**f),
        None => {
            let finest = cfg.steps.iter().copied().fold(f64::INFINITY, f64::min);
            Reference::Run {
                variant: cfg.scheme,
                h: finest / 20.0,
            }
        }
    };
    convergence_order(
        cfg.scheme,
        &cfg.model,
        &cfg.initial,
        cfg.t_end,
        &cfg.steps,
        reference,
        &cfg.solver,
    )
    .map_err(classify)
}

pub fn write_order_csv(est: &OrderEstimate, w: &mut dyn Write) -> io::Result<()> {
    writeln!(w, "h,global_error")?;
    for (h, e) in est.step_sizes.iter().zip(&est.global_errors) {
        writeln!(w, "{},{}", fmt_f64(*h), fmt_f64(*e))?;
    }
    writeln!(w, "order,{}", fmt_f64(est.fitted_order))
}

pub fn cmd_converge(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let est = converge(cfg)?;
    emit(cfg, stdout, |w| write_order_csv(&est, w))?;
    if !est.monotone {
        return Err(CliError::Diagnostic(
            "global errors do not decrease with the step size".into(),
        ));
    }
    Ok(())
}

/// One row of the `check` table.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    pub value: Option<f64>,
    pub threshold: f64,
    pub passed: bool,
    pub note: String,
}

impl CheckRow {
    fn measured(name: &'static str, value: f64, threshold: f64) -> Self {
        CheckRow {
            name,
            value: Some(value),
            threshold,
            passed: value <= threshold,
            note: String::new(),
        }
    }

    fn failed(name: &'static str, threshold: f64, note: String) -> Self {
        CheckRow {
            name,
            value: None,
            threshold,
            passed: false,
            note,
        }
    }
}

pub const DERIVATIVE_TOL: f64 = 1e-6;
pub const SYMPLECTIC_TOL: f64 = 1e-6;
pub const DRIFT_GROWTH_FACTOR: f64 = 1.5;
pub const REVERSIBILITY_MAX_STEPS: usize = 1000;

pub fn run_checks(cfg: &ExperimentConfig) -> Vec<CheckRow> {
    let mut rows = Vec::new();

    match validate_derivatives(&cfg.model, cfg.initial.q(), cfg.fd_step) {
        Ok(r) => {
            rows.push(CheckRow::measured("gradient", r.gradient_error, DERIVATIVE_TOL));
            rows.push(CheckRow::measured("hessian", r.hessian_error, DERIVATIVE_TOL));
        }
        Err(e) => {
            rows.push(CheckRow::failed("gradient", DERIVATIVE_TOL, e.to_string()));
            rows.push(CheckRow::failed("hessian", DERIVATIVE_TOL, e.to_string()));
        }
    }

    let n_rev = cfg.n_steps.min(REVERSIBILITY_MAX_STEPS);
    let rev_tol = 10.0 * n_rev as f64 * cfg.solver.tolerance;
    rows.push(
        match reversibility_error(cfg.scheme, &cfg.model, &cfg.initial, cfg.h, n_rev, &cfg.solver) {
            Ok(v) => CheckRow::measured("reversibility", v, rev_tol),
            Err(e) => CheckRow::failed("reversibility", rev_tol, e.to_string()),
        },
    );

    rows.push(
        match symplecticity_defect(cfg.scheme, &cfg.model, &cfg.initial, cfg.h, cfg.fd_eps, &cfg.solver) {
            Ok(v) => CheckRow::measured("symplecticity", v, SYMPLECTIC_TOL),
            Err(e) => CheckRow::failed("symplecticity", SYMPLECTIC_TOL, e.to_string()),
        },
    );

    let energy_row = match run_trajectory(cfg, cfg.scheme) {
        Err(e) => CheckRow::failed("energy", f64::NAN, e.to_string()),
        Ok(traj) => {
            let h0 = traj.meta.initial_energy;
            let limit = cfg.energy_tol * h0.abs().max(1.0);
            match (&traj.failure, energy_drift(&traj, &cfg.model)) {
                (Some(f), _) => CheckRow::failed(
                    "energy",
                    limit,
                    format!("step {} failed: {}", f.step, f.error),
                ),
                (None, Err(e)) => CheckRow::failed("energy", limit, e.to_string()),
                (None, Ok(drift)) => {
                    let mut row = CheckRow::measured("energy", drift.max_abs, limit);
                    if !drift.is_bounded(DRIFT_GROWTH_FACTOR) {
                        row.passed = false;
                        row.note = format!(
                            "secular growth: late max {:.3e} > {DRIFT_GROWTH_FACTOR} x early max {:.3e}",
                            drift.max_abs_second_half, drift.max_abs_first_half
                        );
                    }
                    row
                }
            }
        }
    };
    rows.push(energy_row);
    rows
}

pub fn write_check_table(rows: &[CheckRow], w: &mut dyn Write) -> io::Result<()> {
    writeln!(w, "{:<14} {:>14} {:>14}  {:<6} note", "check", "value", "threshold", "status")?;
    for r in rows {
        let value = r.value.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
        let status = if r.passed { "PASS" } else { "FAIL" };
        writeln!(w, "{:<14} {:>14} {:>14.6e}  {:<6} {}", r.name, value, r.threshold, status, r.note)?;
    }
    Ok(())
}

pub fn cmd_check(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let rows = run_checks(cfg);
    write_check_table(&rows, stdout)?;
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Diagnostic(format!("failed checks: {}", failed.join(", "))))
    }
}
