//! Command-line front end: `run`, `reference`, `compare` and `check`.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 I/O.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{relative_difference, Entity, FieldRecovery, FieldSnapshot};
use crate::grid::{build_curl, build_gradient};
use crate::io::config::{DumpFields, ScenarioFile};
use crate::io::dump::{DumpArray, FieldDump};
use crate::io::output::{
    diagnostics_csv, fmt_f64, grid_fingerprint, read_json, vtk_snapshot, write_atomic, write_json, ReferenceSummary,
    RunSummary, SnapshotRecord, SolveRecord, WarningRecord,
};
use crate::linalg::SolverKind;
use crate::orchestrator::{run, History, Mode, Retention, RunOptions, Scenario, Scheme};
use crate::reference::solve_reference;

/// Sample time of the comparison, in periods of the excitation.
pub const DEFAULT_SAMPLE_PERIODS: f64 = 3.125;

#[derive(Debug, Parser)]
#[command(name = "darwin-fit", version, about = "Two-step Darwin time-domain solver with a full-Maxwell reference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Time-domain Darwin run.
    Run(RunArgs),
    /// Frequency-domain full-Maxwell reference.
    Reference(ReferenceArgs),
    /// Relative field differences between a run and a reference.
    Compare(CompareArgs),
    /// Operator identities and invariants of a scenario.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the solver tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Override the excitation frequency, Hz.
    #[arg(long)]
    pub freq: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Output directory (defaults to `output.dir` of the scenario).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scheme: Option<Scheme>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, value_enum)]
    pub dump_fields: Option<DumpFields>,
    /// Extra snapshot times, s (repeatable).
    #[arg(long)]
    pub at_time: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ReferenceArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Snapshot times, s (default 3.125 periods).
    #[arg(long)]
    pub at_time: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Directory written by `run`.
    pub run_dir: PathBuf,
    /// Directory written by `reference`.
    pub reference_dir: PathBuf,
    /// Sample time, s (default 3.125 periods of the reference frequency).
    #[arg(long)]
    pub at_time: Option<f64>,
    /// Where to write `comparison.csv` and `comparison.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scheme: Option<Scheme>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Time steps of the invariant run (capped by the scenario).
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
}

/// Parses `args` (including the program name), executes and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Run(a) => run_command(&a).map(|s| {
            print!("{}", describe_run(&s));
            0
        }),
        Command::Reference(a) => reference_command(&a).map(|s| {
            println!(
                "reference f = {} Hz: residual {:.3e}, {} snapshot(s)",
                s.frequency,
                s.residual,
                s.snapshots.len()
            );
            for w in &s.warnings {
                eprintln!("warning [{}]: {}", w.code, w.message);
            }
            0
        }),
        Command::Compare(a) => compare_command(&a).map(|c| {
            print!("{}", c.table());
            0
        }),
        Command::Check(a) => check_command(&a).map(|r| {
            print!("{}", r.table());
            if r.passed() {
                0
            } else {
                2
            }
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    })
}

fn load(args: &ScenarioArgs) -> Result<ScenarioFile> {
    let mut file = ScenarioFile::load(&args.config)?;
    if let Some(tol) = args.tol {
        file.solver.tol = tol;
    }
    if let Some(f) = args.freq {
        file.excitation.frequency = f;
    }
    Ok(file)
}

fn out_dir(explicit: &Option<PathBuf>, file: &ScenarioFile) -> Result<PathBuf> {
    explicit
        .clone()
        .or_else(|| file.output.dir.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set output.dir".into()))
}

/// Time level closest to `t`, required to be a completed step.
fn level_of(t: f64, sc: &Scenario) -> Result<usize> {
    let n = (t / sc.dt).round();
    if !(t.is_finite() && n >= 1.0 && (n as usize) < sc.n_end) {
        return Err(Error::Config(format!(
            "sample time {t} s lies outside (0, {}] s",
            sc.t_end()
        )));
    }
    Ok(n as usize)
}

fn snapshot_levels(file: &ScenarioFile, sc: &Scenario) -> Result<BTreeSet<usize>> {
    let mut levels = BTreeSet::new();
    match file.output.dump_fields {
        DumpFields::None => {}
        DumpFields::Summary => {
            for t in &file.output.sample_times {
                levels.insert(level_of(*t, sc)?);
            }
            if sc.n_end > 1 {
                levels.insert(sc.n_end - 1);
            }
        }
        DumpFields::All => levels.extend(1..sc.n_end),
    }
    Ok(levels)
}

fn write_snapshot(dir: &Path, stem: &str, fp: &str, sc: &Scenario, s: &FieldSnapshot, n: Option<usize>) -> Result<SnapshotRecord> {
    let file = format!("fields/{stem}.fit");
    let vtk = format!("fields/{stem}.vtk");
    FieldDump::from_snapshot(fp, s).write(dir.join(&file))?;
    write_atomic(dir.join(&vtk), vtk_snapshot(&sc.grid, s).as_bytes())?;
    Ok(SnapshotRecord {
        n,
        t: s.t,
        file,
        vtk: Some(vtk),
    })
}

fn max_solenoidality_ratio(h: &History) -> f64 {
    h.diagnostics
        .iter()
        .filter(|d| d.n > 0)
        .map(|d| {
            if d.flux_scale > 0.0 {
                d.solenoidality / d.flux_scale
            } else {
                d.solenoidality
            }
        })
        .fold(0.0, f64::max)
}

/// Executes `run`, writing `summary.json`, `diagnostics.csv` and snapshots.
pub fn run_command(args: &RunArgs) -> Result<RunSummary> {
    let mut file = load(&args.scenario)?;
    if let Some(s) = args.scheme {
        file.time.scheme = s;
    }
    if let Some(m) = args.mode {
        file.time.mode = m;
    }
    if let Some(d) = args.dump_fields {
        file.output.dump_fields = d;
    }
    file.output.sample_times.extend(&args.at_time);
    let dir = out_dir(&args.out, &file)?;
    let sc = file.build()?;
    let fp = grid_fingerprint(&sc.grid, &sc.regions);
    let levels = snapshot_levels(&file, &sc)?;
    let retention = match file.output.dump_fields {
        DumpFields::All => Retention::All,
        _ => Retention::Around(levels.clone()),
    };
    let history = run(
        &sc,
        &RunOptions {
            retention,
            spill_dir: None,
        },
    )?;
    let rec = FieldRecovery::new(&sc.grid);
    let mut snapshots = Vec::new();
    for &n in &levels {
        let s = rec.at_level(&history, n)?;
        snapshots.push(write_snapshot(&dir, &format!("level_{n:06}"), &fp, &sc, &s, Some(n))?);
    }
    write_atomic(dir.join("diagnostics.csv"), diagnostics_csv(&history.diagnostics).as_bytes())?;
    let last = history.last();
    let summary = RunSummary {
        fingerprint: fp,
        scenario: file,
        dt: sc.dt,
        n_end: sc.n_end,
        t_end: sc.t_end(),
        scheme: sc.scheme,
        mode: sc.mode,
        wall_time: history.wall_time,
        warnings: history.warnings.iter().map(WarningRecord::from).collect(),
        max_divergence_ratio: history.max_divergence_ratio(),
        max_solenoidality_ratio: max_solenoidality_ratio(&history),
        final_phi_norm: crate::linalg::norm2(&last.phi),
        final_a_norm: crate::linalg::norm2(&last.a),
        diagnostics: "diagnostics.csv".into(),
        snapshots,
    };
    write_json(dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn describe_run(s: &RunSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} levels ({:?}, {:?}), t_end = {:.6e} s, wall time {:.3} s",
        s.n_end, s.scheme, s.mode, s.t_end, s.wall_time
    );
    let _ = writeln!(
        out,
        "max divergence ratio {:.3e}, max solenoidality ratio {:.3e}, {} snapshot(s)",
        s.max_divergence_ratio,
        s.max_solenoidality_ratio,
        s.snapshots.len()
    );
    for w in &s.warnings {
        let _ = writeln!(out, "warning [{}]: {}", w.code, w.message);
    }
    out
}

/// Executes `reference`, writing `reference.json`, `phasors.fit` and snapshots.
pub fn reference_command(args: &ReferenceArgs) -> Result<ReferenceSummary> {
    let file = load(&args.scenario)?;
    let dir = out_dir(&args.out, &file)?;
    let f = file.excitation.frequency;
    if !(f.is_finite() && f > 0.0) {
        return Err(Error::Config(format!("reference frequency {f} must be positive")));
    }
    let sc = file.build()?;
    let fp = grid_fingerprint(&sc.grid, &sc.regions);
    let sol = solve_reference(&sc, f)?;
    let phasors = FieldDump {
        fingerprint: fp.clone(),
        t: 0.0,
        omega: sol.omega,
        arrays: [
            ("phi", &sol.phi),
            ("a", &sol.a),
            ("e_irr", &sol.e_irr),
            ("e_rem", &sol.e_rem),
            ("b", &sol.b),
        ]
        .into_iter()
        .map(|(n, v)| (n.to_string(), DumpArray::Complex(v.clone())))
        .collect(),
    };
    phasors.write(dir.join("phasors.fit"))?;
    let times = if !args.at_time.is_empty() {
        args.at_time.clone()
    } else if !file.output.sample_times.is_empty() {
        file.output.sample_times.clone()
    } else {
        vec![DEFAULT_SAMPLE_PERIODS / f]
    };
    let mut snapshots = Vec::new();
    for (i, t) in times.iter().enumerate() {
        if !(t.is_finite() && *t >= 0.0) {
            return Err(Error::Config(format!("sample time {t} must be >= 0")));
        }
        let s = sol.time_sample(*t);
        snapshots.push(write_snapshot(&dir, &format!("sample_{i:03}"), &fp, &sc, &s, None)?);
    }
    let summary = ReferenceSummary {
        fingerprint: fp,
        scenario: file,
        frequency: f,
        omega: sol.omega,
        residual: sol.residual,
        gauge_exact: sol.gauge_exact,
        warnings: sol.warnings.iter().map(WarningRecord::from).collect(),
        solves: sol.reports.iter().map(SolveRecord::from).collect(),
        phasors: "phasors.fit".into(),
        snapshots,
    };
    write_json(dir.join("reference.json"), &summary)?;
    Ok(summary)
}

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub quantity: String,
    /// Complex-magnitude denominator.
    pub relative_difference: f64,
    /// Real-part denominator.
    pub relative_difference_real: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub frequency: f64,
    /// Time of the Darwin snapshot used.
    pub t: f64,
    pub level: Option<usize>,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn row(&self, quantity: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }

    pub fn table(&self) -> String {
        let mut out = format!("f = {:e} Hz, t = {:.6e} s\n", self.frequency, self.t);
        let _ = writeln!(out, "{:<8} {:>14} {:>14}", "quantity", "rel. diff", "(real denom.)");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<8} {:>14.6e} {:>14.6e}",
                r.quantity, r.relative_difference, r.relative_difference_real
            );
        }
        out
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("quantity,relative_difference,relative_difference_real\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{}",
                r.quantity,
                fmt_f64(r.relative_difference),
                fmt_f64(r.relative_difference_real)
            );
        }
        out
    }
}

/// Executes `compare` on two artifact directories.
pub fn compare_command(args: &CompareArgs) -> Result<Comparison> {
    let run: RunSummary = read_json(args.run_dir.join("summary.json"))?;
    let reference: ReferenceSummary = read_json(args.reference_dir.join("reference.json"))?;
    if run.fingerprint != reference.fingerprint {
        return Err(Error::FingerprintMismatch(run.fingerprint, reference.fingerprint));
    }
    let t = args
        .at_time
        .unwrap_or(DEFAULT_SAMPLE_PERIODS / reference.frequency);
    let snap_rec = run
        .snapshots
        .iter()
        .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
        .filter(|s| (s.t - t).abs() <= 0.5 * run.dt)
        .ok_or_else(|| {
            Error::Config(format!(
                "run has no snapshot within half a step of t = {t} s; rerun with --at-time {t}"
            ))
        })?;
    let snap_path = args.run_dir.join(&snap_rec.file);
    let darwin = FieldDump::read(&snap_path)?;
    if darwin.fingerprint != run.fingerprint {
        return Err(Error::FingerprintMismatch(darwin.fingerprint, run.fingerprint));
    }
    let snap = darwin.to_snapshot(&snap_path.display().to_string())?;
    let ph_path = args.reference_dir.join(&reference.phasors);
    let ph = FieldDump::read(&ph_path)?;
    if ph.fingerprint != reference.fingerprint {
        return Err(Error::FingerprintMismatch(ph.fingerprint, reference.fingerprint));
    }
    let p = ph_path.display().to_string();
    let rot = Complex64::from_polar(1.0, ph.omega * snap.t);
    let at = |v: &[Complex64]| v.iter().map(|x| x * rot).collect::<Vec<_>>();
    let e_irr = ph.complex("e_irr", &p)?;
    let e_rem = ph.complex("e_rem", &p)?;
    let e_ref = at(&e_irr.iter().zip(e_rem).map(|(x, y)| x + y).collect::<Vec<_>>());
    let b_ref = at(ph.complex("b", &p)?);
    let grid = run.scenario.build()?.grid;
    let mut rows = Vec::new();
    for (q, entity, r, test) in [
        ("B", Entity::Face, &b_ref, &snap.b),
        ("E", Entity::Edge, &e_ref, &snap.e_total),
        ("E_irr", Entity::Edge, &e_ref, &snap.e_irr),
    ] {
        let d = relative_difference(&grid, entity, r, test)?;
        rows.push(ComparisonRow {
            quantity: q.into(),
            relative_difference: d.value,
            relative_difference_real: d.real_denominator,
        });
    }
    let cmp = Comparison {
        frequency: reference.frequency,
        t: snap.t,
        level: snap_rec.n,
        rows,
    };
    if let Some(dir) = &args.out {
        write_atomic(dir.join("comparison.csv"), cmp.csv().as_bytes())?;
        write_json(dir.join("comparison.json"), &cmp)?;
    }
    Ok(cmp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    Warn,
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub status: Status,
    pub value: f64,
    pub bound: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub fingerprint: String,
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.status != Status::Fail)
    }

    pub fn item(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.name == name)
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        for i in &self.items {
            let tag = match i.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Warn => "WARN",
                Status::Info => "INFO",
            };
            let bound = i.bound.map(|b| format!(" (bound {b:.3e})")).unwrap_or_default();
            let _ = writeln!(out, "{tag} {:<26} {:.3e}{bound}  {}", i.name, i.value, i.detail);
        }
        out
    }
}

fn bounded(name: &str, value: f64, bound: f64, detail: String) -> CheckItem {
    CheckItem {
        name: name.into(),
        status: if value <= bound { Status::Pass } else { Status::Fail },
        value,
        bound: Some(bound),
        detail,
    }
}

/// Executes `check`: operator identities, material positivity, validity
/// warnings and a short run monitoring divergence and solenoidality.
pub fn check_command(args: &CheckArgs) -> Result<CheckReport> {
    let mut file = load(&args.scenario)?;
    if let Some(s) = args.scheme {
        file.time.scheme = s;
    }
    if let Some(m) = args.mode {
        file.time.mode = m;
    }
    let mut sc = file.build()?;
    let fp = grid_fingerprint(&sc.grid, &sc.regions);
    let mut items = Vec::new();

    let g = build_gradient(&sc.grid);
    let c = build_curl(&sc.grid);
    let cg = c.compose(&g).iter().map(|(_, _, v)| v.unsigned_abs()).max().unwrap_or(0);
    items.push(bounded("operator-identity", cg as f64, 0.0, "max |C·G| in integer arithmetic".into()));

    let m = sc.materials()?;
    let min_sigma = m.m_sigma(sc.stabilized).into_iter().fold(f64::INFINITY, f64::min);
    let min_nu = m.m_nu.iter().copied().fold(f64::INFINITY, f64::min);
    items.push(CheckItem {
        name: "material-positivity".into(),
        status: if min_sigma > 0.0 && min_nu > 0.0 { Status::Pass } else { Status::Fail },
        value: min_sigma.min(min_nu),
        bound: None,
        detail: format!("min M_sigma {min_sigma:.3e}, min M_nu {min_nu:.3e}"),
    });

    let ratio = sc.quasistatic_ratio();
    items.push(CheckItem {
        name: "quasistatic-validity".into(),
        status: if sc.warnings().is_empty() { Status::Pass } else { Status::Warn },
        value: ratio,
        bound: Some(crate::orchestrator::QUASISTATIC_LIMIT),
        detail: "domain size over wavelength".into(),
    });
    items.push(CheckItem {
        name: "boundary-coverage".into(),
        status: Status::Info,
        value: (sc.electrodes.num_excited() + sc.electrodes.num_grounded()) as f64,
        bound: None,
        detail: if sc.electrodes.covers_boundary(&sc.grid) {
            "every boundary node carries Dirichlet data".into()
        } else {
            "some boundary nodes are free (natural boundary)".into()
        },
    });

    sc.n_end = sc.n_end.min(args.steps + 1);
    let h = run(
        &sc,
        &RunOptions {
            retention: Retention::Last(1),
            spill_dir: None,
        },
    )?;
    let tol = sc.solver.tol;
    let div_bound = if sc.solver.kind == SolverKind::Cg { 1e4 * tol } else { 1e-8 };
    items.push(bounded(
        "divergence-preservation",
        h.max_divergence_ratio(),
        div_bound,
        format!("max |G^T M_kappa a| / max |M_kappa a| over {} steps", sc.n_end - 1),
    ));
    items.push(bounded(
        "solenoidal-current",
        max_solenoidality_ratio(&h),
        100.0 * tol,
        "max over steps of |G^T j| / |M_sigma G phi|".into(),
    ));
    let report = CheckReport { fingerprint: fp, items };
    if let Some(dir) = &args.out {
        write_json(dir.join("check.json"), &report)?;
    }
    Ok(report)
}
