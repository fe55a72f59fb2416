//! CSV emission and atomic file writes.
//!
//! Numbers are written in scientific notation with 17 significant digits,
//! which round-trips every `f64` exactly.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use conscheme::{PhaseState, PotentialModel, Trajectory};

/// Formats a float with 17 significant digits; NaN is spelled `nan`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn trajectory_header(dim: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=dim).map(|i| format!("q{i}")));
    cols.extend((1..=dim).map(|i| format!("p{i}")));
    cols.push("H".into());
    cols.push("dH".into());
    cols.join(",")
}

/// Writes `t,q1..qd,p1..pd,H,dH`, one row per record, plus a trailing
/// `# aborted at step <k>` line when the run failed.
pub fn write_trajectory_csv<W: Write + ?Sized>(
    out: &mut W,
    traj: &Trajectory,
    model: &PotentialModel,
) -> io::Result<()> {
    writeln!(out, "{}", trajectory_header(model.dimension()))?;
    let h0 = traj.meta.initial_energy;
    let mut row = String::new();
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let energy = model
            .hamiltonian_energy(s)
            .map(|e| e.total)
            .unwrap_or(f64::NAN);
        row.clear();
        row.push_str(&fmt_f64(*t));
        for v in s.q().iter().chain(s.p().iter()) {
            row.push(',');
            row.push_str(&fmt_f64(*v));
        }
        row.push(',');
        row.push_str(&fmt_f64(energy));
        row.push(',');
        row.push_str(&fmt_f64(energy - h0));
        writeln!(out, "{row}")?;
    }
    if let Some(failure) = &traj.failure {
        writeln!(out, "# aborted at step {}", failure.step)?;
    }
    Ok(())
}

/// A parsed trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRows {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    pub energy: Vec<f64>,
    pub drift: Vec<f64>,
    pub aborted_at: Option<usize>,
}

pub fn read_trajectory_csv(text: &str) -> Result<TrajectoryRows, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let ncols = header.split(',').count();
    if ncols < 5 || (ncols - 3) % 2 != 0 {
        return Err(format!("unexpected header `{header}`"));
    }
    let dim = (ncols - 3) / 2;
    if header != trajectory_header(dim) {
        return Err(format!("unexpected header `{header}`"));
    }
    let mut rows = TrajectoryRows {
        times: Vec::new(),
        states: Vec::new(),
        energy: Vec::new(),
        drift: Vec::new(),
        aborted_at: None,
    };
    for (i, line) in lines.enumerate() {
        if let Some(rest) = line.strip_prefix("# aborted at step ") {
            rows.aborted_at = Some(rest.trim().parse().map_err(|_| format!("bad trailer `{line}`"))?);
            continue;
        }
        let values = line
            .split(',')
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("row {}: {e}", i + 2))?;
        if values.len() != ncols {
            return Err(format!("row {}: expected {ncols} columns, found {}", i + 2, values.len()));
        }
        rows.times.push(values[0]);
        rows.states.push(
            PhaseState::from_slices(&values[1..=dim], &values[dim + 1..=2 * dim])
                .map_err(|e| format!("row {}: {e}", i + 2))?,
        );
        rows.energy.push(values[2 * dim + 1]);
        rows.drift.push(values[2 * dim + 2]);
    }
    Ok(rows)
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never observe a half-written file.
pub fn write_atomic<F>(path: &Path, fill: F) -> io::Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut buf = io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush()?;
    }
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting() {
        assert_eq!(fmt_f64(0.0), "0.0000000000000000e0");
        assert_eq!(fmt_f64(f64::NAN), "nan");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(trajectory_header(2), "t,q1,q2,p1,p2,H,dH");
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(read_trajectory_csv("").is_err());
        assert!(read_trajectory_csv("t,q1,p1,H").is_err());
        assert!(read_trajectory_csv("t,q1,p1,H,dH\n1,2,3").is_err());
        assert!(read_trajectory_csv("t,q1,p1,H,dH\n1,2,3,x,5").is_err());
    }

    #[test]
    fn atomic_write_replaces_target() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("out.csv");
        write_atomic(&path, |w| w.write_all(b"one\n")).unwrap();
        write_atomic(&path, |w| w.write_all(b"two\n")).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two\n");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
