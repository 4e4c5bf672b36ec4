//! Run artifacts: atomic writes, grid fingerprints, CSV tables, JSON
//! summaries and legacy VTK exports.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::FieldSnapshot;
use crate::grid::{Axis, StructuredGrid};
use crate::linalg::SolveReport;
use crate::materials::MaterialRegion;
use crate::orchestrator::{Mode, Scheme, StepDiagnostics, Warning};

use super::config::ScenarioFile;

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

/// SHA-256 over node counts, spacings and the region list, hex encoded.
/// Floats enter by their bit patterns, so the hash is platform independent.
pub fn grid_fingerprint(grid: &StructuredGrid, regions: &[MaterialRegion]) -> String {
    let mut h = Sha256::new();
    h.update(b"darwin-fit grid v1\n");
    for n in grid.nodes_per_axis() {
        h.update((n as u64).to_le_bytes());
    }
    for s in grid.spacing() {
        h.update(s.to_bits().to_le_bytes());
    }
    h.update((regions.len() as u64).to_le_bytes());
    for r in regions {
        for v in r.min.iter().chain(&r.max).chain([&r.kappa, &r.epsilon_r, &r.mu_r]) {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Scientific notation with 17 significant digits; parses back bit-exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

const DIAGNOSTIC_COLUMNS: [&str; 12] = [
    "n",
    "t",
    "eqs_iterations",
    "eqs_residual",
    "mqs_iterations",
    "mqs_residual",
    "solenoidality",
    "flux_scale",
    "divergence",
    "divergence_scale",
    "phi_norm",
    "a_norm",
];

pub fn diagnostics_csv(rows: &[StepDiagnostics]) -> String {
    let mut out = DIAGNOSTIC_COLUMNS.join(",");
    out.push('\n');
    for d in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            d.n,
            fmt_f64(d.t),
            d.eqs_iterations,
            fmt_f64(d.eqs_residual),
            d.mqs_iterations,
            fmt_f64(d.mqs_residual),
            fmt_f64(d.solenoidality),
            fmt_f64(d.flux_scale),
            fmt_f64(d.divergence),
            fmt_f64(d.divergence_scale),
            fmt_f64(d.phi_norm),
            fmt_f64(d.a_norm),
        );
    }
    out
}

pub fn parse_diagnostics_csv(text: &str, path: &str) -> Result<Vec<StepDiagnostics>> {
    let fail = |line: usize, reason: String| Error::Format {
        path: path.to_string(),
        reason: format!("line {line}: {reason}"),
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| fail(1, "empty file".into()))?;
    if header.split(',').ne(DIAGNOSTIC_COLUMNS) {
        return Err(fail(1, format!("unexpected header `{header}`")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != DIAGNOSTIC_COLUMNS.len() {
                return Err(fail(i + 2, format!("expected {} columns", DIAGNOSTIC_COLUMNS.len())));
            }
            let int = |k: usize| cells[k].parse::<usize>().map_err(|e| fail(i + 2, format!("{}: {e}", DIAGNOSTIC_COLUMNS[k])));
            let float = |k: usize| cells[k].parse::<f64>().map_err(|e| fail(i + 2, format!("{}: {e}", DIAGNOSTIC_COLUMNS[k])));
            Ok(StepDiagnostics {
                n: int(0)?,
                t: float(1)?,
                eqs_iterations: int(2)?,
                eqs_residual: float(3)?,
                mqs_iterations: int(4)?,
                mqs_residual: float(5)?,
                solenoidality: float(6)?,
                flux_scale: float(7)?,
                divergence: float(8)?,
                divergence_scale: float(9)?,
                phi_norm: float(10)?,
                a_norm: float(11)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarningRecord {
    pub code: String,
    pub message: String,
    pub value: f64,
}

impl From<&Warning> for WarningRecord {
    fn from(w: &Warning) -> Self {
        Self {
            code: w.code.to_string(),
            message: w.message.clone(),
            value: w.value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub method: String,
    pub iterations: usize,
    pub relative_residual: f64,
    pub wall_time: f64,
}

impl From<&SolveReport> for SolveRecord {
    fn from(r: &SolveReport) -> Self {
        Self {
            method: r.method.to_string(),
            iterations: r.iterations,
            relative_residual: r.relative_residual,
            wall_time: r.wall_time,
        }
    }
}

/// A field snapshot written to disk; paths are relative to the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub t: f64,
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vtk: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub fingerprint: String,
    pub scenario: ScenarioFile,
    pub dt: f64,
    pub n_end: usize,
    pub t_end: f64,
    pub scheme: Scheme,
    pub mode: Mode,
    pub wall_time: f64,
    pub warnings: Vec<WarningRecord>,
    /// `max ‖GᵀM_κa‖ / max ‖M_κa‖` over the run.
    pub max_divergence_ratio: f64,
    /// Largest per-step `‖Gᵀj‖ / ‖M_σGφ‖`.
    pub max_solenoidality_ratio: f64,
    pub final_phi_norm: f64,
    pub final_a_norm: f64,
    pub diagnostics: String,
    pub snapshots: Vec<SnapshotRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub fingerprint: String,
    pub scenario: ScenarioFile,
    pub frequency: f64,
    pub omega: f64,
    pub residual: f64,
    pub gauge_exact: bool,
    pub warnings: Vec<WarningRecord>,
    pub solves: Vec<SolveRecord>,
    /// Complex phasor dump (`phi`, `a`, `e_irr`, `e_rem`, `b`).
    pub phasors: String,
    pub snapshots: Vec<SnapshotRecord>,
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("cannot serialize {}: {e}", path.as_ref().display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Cell-averaged field vectors: E from the four parallel edges of each cell
/// (V/m), B from the two opposite faces divided by their area (T).
pub fn cell_vectors(grid: &StructuredGrid, s: &FieldSnapshot) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let mut e = vec![[0.0; 3]; grid.num_cells()];
    let mut b = vec![[0.0; 3]; grid.num_cells()];
    for (c, (ec, bc)) in e.iter_mut().zip(b.iter_mut()).enumerate() {
        let p = grid.cell_coords(c);
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let d = axis.index();
            let (u, v) = axis.transverse();
            let mut sum = 0.0;
            for du in 0..2 {
                for dv in 0..2 {
                    let mut q = p;
                    q[u.index()] += du;
                    q[v.index()] += dv;
                    sum += s.e_total[grid.edge(axis, q)];
                }
            }
            ec[d] = 0.25 * sum;
            let mut q = p;
            q[d] += 1;
            bc[d] = 0.5 * (s.b[grid.face(axis, p)] + s.b[grid.face(axis, q)]) / grid.face_area(axis);
        }
    }
    (e, b)
}

/// Legacy ASCII VTK structured-points file with cell vectors `E` and `B`.
pub fn vtk_snapshot(grid: &StructuredGrid, s: &FieldSnapshot) -> String {
    let [nx, ny, nz] = grid.nodes_per_axis();
    let [hx, hy, hz] = grid.spacing();
    let (e, b) = cell_vectors(grid, s);
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "darwin-fit fields t={}", fmt_f64(s.t));
    let _ = writeln!(out, "ASCII\nDATASET STRUCTURED_POINTS");
    let _ = writeln!(out, "DIMENSIONS {nx} {ny} {nz}\nORIGIN 0 0 0");
    let _ = writeln!(out, "SPACING {} {} {}", fmt_f64(hx), fmt_f64(hy), fmt_f64(hz));
    let _ = writeln!(out, "CELL_DATA {}", grid.num_cells());
    for (name, data) in [("E", &e), ("B", &b)] {
        let _ = writeln!(out, "VECTORS {name} double");
        for v in data.iter() {
            let _ = writeln!(out, "{} {} {}", fmt_f64(v[0]), fmt_f64(v[1]), fmt_f64(v[2]));
        }
    }
    out
}
