//! Time stepping of the two-step scheme: both steps per time level
//! (interleaved) or the full potential history first and the vector
//! potential history second (two-loop).

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::eqs::{assemble_eqs, Electrodes, EqsSystem, StepOptions};
use crate::error::{Error, Result};
use crate::grid::StructuredGrid;
use crate::linalg::{norm2, SolveReport, SolverSettings};
use crate::materials::{assemble_materials, MaterialAssembly, MaterialRegion, Regularization, SPEED_OF_LIGHT};
use crate::mqs::{assemble_mqs, DivergenceMonitor, MqsSystem};

/// Longest-side-to-wavelength ratio above which the quasistatic model is questionable.
pub const QUASISTATIC_LIMIT: f64 = 0.01;

/// Ramped sine `φ_max · f · min(t, 1/f) · sin(2πft)`.
pub fn excitation(t: f64, phi_max: f64, f: f64) -> f64 {
    phi_max * f * t.min(1.0 / f) * (2.0 * std::f64::consts::PI * f * t).sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Euler,
    #[default]
    Trapezoidal,
}

impl Scheme {
    pub fn theta(self) -> f64 {
        match self {
            Scheme::Euler => 1.0,
            Scheme::Trapezoidal => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    TwoLoop,
    Interleaved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Waveform {
    /// Sine ramped in amplitude over the first period.
    #[default]
    RampedSine,
    /// Constant `φ_max` for all `t ≥ 0`.
    Constant,
}

/// Potential applied to the excited electrode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Excitation {
    /// Volts.
    pub phi_max: f64,
    /// Hertz.
    pub frequency: f64,
    #[serde(default)]
    pub waveform: Waveform,
}

impl Excitation {
    pub fn ramped(phi_max: f64, frequency: f64) -> Self {
        Self {
            phi_max,
            frequency,
            waveform: Waveform::RampedSine,
        }
    }

    pub fn constant(phi_max: f64) -> Self {
        Self {
            phi_max,
            frequency: 1.0,
            waveform: Waveform::Constant,
        }
    }

    /// Unit-amplitude waveform.
    pub fn shape(&self, t: f64) -> f64 {
        match self.waveform {
            Waveform::RampedSine => excitation(t, 1.0, self.frequency),
            Waveform::Constant => 1.0,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self.waveform {
            Waveform::RampedSine => excitation(t, self.phi_max, self.frequency),
            Waveform::Constant => self.phi_max,
        }
    }

    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.frequency
    }

    fn validate(&self) -> Result<()> {
        if !self.phi_max.is_finite() {
            return Err(Error::Config("excitation.phi_max must be finite".into()));
        }
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return Err(Error::Config(format!(
                "excitation.frequency = {} must be positive",
                self.frequency
            )));
        }
        Ok(())
    }
}

/// Fully resolved simulation setup.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid: StructuredGrid,
    pub regions: Vec<MaterialRegion>,
    pub electrodes: Electrodes,
    pub excitation: Excitation,
    /// Seconds.
    pub dt: f64,
    /// Number of time levels including the initial one.
    pub n_end: usize,
    pub scheme: Scheme,
    pub mode: Mode,
    pub regularization: Regularization,
    /// Use the regularized conductance in the potential equation.
    pub stabilized: bool,
    pub solver: SolverSettings,
    /// Optional source current pattern per edge, scaled by the unit waveform.
    pub source: Option<Vec<f64>>,
}

/// Structured warning attached to a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Warning {
    pub code: &'static str,
    pub message: String,
    pub value: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.excitation.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt = {} must be positive", self.dt)));
        }
        if self.n_end < 1 {
            return Err(Error::Config("n_end must be at least 1".into()));
        }
        if self.electrodes.num_nodes() != self.grid.num_nodes() {
            return Err(Error::Dimension {
                expected: self.grid.num_nodes(),
                got: self.electrodes.num_nodes(),
                context: "electrodes",
            });
        }
        if let Some(s) = &self.source {
            if s.len() != self.grid.num_edges() {
                return Err(Error::Dimension {
                    expected: self.grid.num_edges(),
                    got: s.len(),
                    context: "source current pattern",
                });
            }
        }
        self.solver.validate()
    }

    /// `ℓ/λ` with `ℓ` the longest domain side and `λ = c/f`.
    pub fn quasistatic_ratio(&self) -> f64 {
        self.grid.longest_side() * self.excitation.frequency / SPEED_OF_LIGHT
    }

    pub fn warnings(&self) -> Vec<Warning> {
        let r = self.quasistatic_ratio();
        let mut out = Vec::new();
        if r >= QUASISTATIC_LIMIT {
            out.push(Warning {
                code: "quasistatic-validity",
                message: format!("domain size over wavelength is {r:.3e} (>= {QUASISTATIC_LIMIT}); the Darwin model may be inaccurate"),
                value: r,
            });
        }
        out
    }

    pub fn t_end(&self) -> f64 {
        (self.n_end - 1) as f64 * self.dt
    }

    pub fn step_options(&self) -> StepOptions {
        StepOptions {
            theta: self.scheme.theta(),
            stabilized: self.stabilized,
            solver: self.solver,
        }
    }

    pub fn materials(&self) -> Result<MaterialAssembly> {
        assemble_materials(&self.grid, &self.regions, self.regularization, self.dt)
    }

    /// Source current at `t`, if any.
    pub fn source_at(&self, t: f64) -> Option<Vec<f64>> {
        self.source.as_ref().map(|p| {
            let s = self.excitation.shape(t);
            p.iter().map(|v| v * s).collect()
        })
    }

    /// The same scenario with every potential and current scaled by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.excitation.phi_max *= s;
        if let Some(p) = &mut out.source {
            for v in p {
                *v *= s;
            }
        }
        out
    }
}

/// Potentials at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    pub n: usize,
    pub t: f64,
    /// Nodal potentials, volts.
    pub phi: Vec<f64>,
    /// Edge circulations of the vector potential, V·s.
    pub a: Vec<f64>,
    /// Step-averaged total current of the step ending here (none at `n = 0`).
    pub j_total: Option<Vec<f64>>,
}

/// One row per time level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub n: usize,
    pub t: f64,
    pub eqs_iterations: usize,
    pub eqs_residual: f64,
    pub mqs_iterations: usize,
    pub mqs_residual: f64,
    /// `‖Gᵀ j‖_∞` over free nodes.
    pub solenoidality: f64,
    /// `‖M_σ G φ‖_∞` over the potentials entering the step's current.
    pub flux_scale: f64,
    /// `‖Gᵀ M_κ aⁿ‖_∞` over interior nodes.
    pub divergence: f64,
    /// `‖M_κ aⁿ‖_∞`.
    pub divergence_scale: f64,
    pub phi_norm: f64,
    pub a_norm: f64,
}

impl StepDiagnostics {
    fn initial(t: f64, phi: &[f64], a: &[f64]) -> Self {
        Self {
            n: 0,
            t,
            eqs_iterations: 0,
            eqs_residual: 0.0,
            mqs_iterations: 0,
            mqs_residual: 0.0,
            solenoidality: 0.0,
            flux_scale: 0.0,
            divergence: 0.0,
            divergence_scale: 0.0,
            phi_norm: norm2(phi),
            a_norm: norm2(a),
        }
    }
}

fn report_parts(r: &Option<SolveReport>) -> (usize, f64) {
    r.as_ref().map_or((0, 0.0), |r| (r.iterations, r.relative_residual))
}

/// Which time levels are kept in memory. The final level is always kept.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Retention {
    #[default]
    All,
    /// The last `k` levels.
    Last(usize),
    /// The listed levels with the two levels before and one after each
    /// (needed for field recovery).
    Around(BTreeSet<usize>),
}

impl Retention {
    fn keeps(&self, n: usize, n_end: usize) -> bool {
        if n + 1 == n_end {
            return true;
        }
        match self {
            Retention::All => true,
            Retention::Last(k) => n + k >= n_end,
            Retention::Around(set) => {
                (n..=n + 2).any(|k| set.contains(&k)) || (n > 0 && set.contains(&(n - 1)))
            }
        }
    }
}

/// Run controls that do not affect the numbers.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub retention: Retention,
    /// When set, the two-loop mode spills the per-step potentials and total
    /// currents to a scratch file in this directory instead of memory.
    pub spill_dir: Option<PathBuf>,
}

/// Output of a run.
#[derive(Debug, Clone)]
pub struct History {
    pub dt: f64,
    pub scheme: Scheme,
    pub mode: Mode,
    /// Retained levels in ascending `n`.
    pub states: Vec<SimulationState>,
    /// One row per time level, including `n = 0`.
    pub diagnostics: Vec<StepDiagnostics>,
    pub warnings: Vec<Warning>,
    /// Seconds.
    pub wall_time: f64,
}

impl History {
    pub fn state(&self, n: usize) -> Option<&SimulationState> {
        self.states.binary_search_by_key(&n, |s| s.n).ok().map(|i| &self.states[i])
    }

    pub fn last(&self) -> &SimulationState {
        self.states.last().expect("history always retains the final level")
    }

    /// Largest divergence-monitor ratio over all levels.
    pub fn max_divergence_ratio(&self) -> f64 {
        let scale = self.diagnostics.iter().fold(0.0f64, |m, d| m.max(d.divergence_scale));
        let div = self.diagnostics.iter().fold(0.0f64, |m, d| m.max(d.divergence));
        if scale == 0.0 {
            div
        } else {
            div / scale
        }
    }
}

/// Assembled operators of a scenario, reusable across runs.
pub struct Stepper<'a> {
    scenario: &'a Scenario,
    pub materials: MaterialAssembly,
    pub eqs: EqsSystem,
    pub mqs: MqsSystem,
    pub monitor: DivergenceMonitor,
}

impl<'a> Stepper<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        scenario.validate()?;
        let materials = scenario.materials()?;
        let opts = scenario.step_options();
        let eqs = assemble_eqs(&scenario.grid, &materials, &scenario.electrodes, &opts)?;
        let mqs = assemble_mqs(&scenario.grid, &materials, &opts)?;
        let monitor = DivergenceMonitor::new(&scenario.grid, &materials);
        Ok(Self {
            scenario,
            materials,
            eqs,
            mqs,
            monitor,
        })
    }

    fn time(&self, n: usize) -> f64 {
        n as f64 * self.scenario.dt
    }

    /// `φ⁰` from the stationary problem at `t = 0`; `a⁰ = 0`.
    pub fn initial_state(&self) -> Result<SimulationState> {
        let sc = self.scenario;
        let phi = self
            .eqs
            .stationary(sc.excitation.value(0.0), sc.source_at(0.0).as_deref(), &sc.solver)?;
        Ok(SimulationState {
            n: 0,
            t: 0.0,
            phi,
            a: vec![0.0; sc.grid.num_edges()],
            j_total: None,
        })
    }

    /// Potential step `n → n+1` with its total current.
    fn eqs_step(&self, n: usize, phi_n: &[f64]) -> Result<(Vec<f64>, Vec<f64>, StepDiagnostics)> {
        let sc = self.scenario;
        let (t0, t1) = (self.time(n), self.time(n + 1));
        let (js0, js1) = (sc.source_at(t0), sc.source_at(t1));
        let (phi1, rep) = self
            .eqs
            .advance(phi_n, sc.excitation.value(t1), js0.as_deref(), js1.as_deref())?;
        let tc = self
            .eqs
            .total_current(n + 1, &phi1, phi_n, js0.as_deref(), js1.as_deref())?;
        let (it, res) = report_parts(&rep);
        let diag = StepDiagnostics {
            n: n + 1,
            t: t1,
            eqs_iterations: it,
            eqs_residual: res,
            mqs_iterations: 0,
            mqs_residual: 0.0,
            solenoidality: tc.solenoidality,
            flux_scale: tc.flux_scale,
            divergence: 0.0,
            divergence_scale: 0.0,
            phi_norm: norm2(&phi1),
            a_norm: 0.0,
        };
        Ok((phi1, tc.j, diag))
    }

    fn mqs_step(&self, a_n: &[f64], j: &[f64], diag: &mut StepDiagnostics) -> Result<Vec<f64>> {
        let (a1, rep) = self.mqs.advance(a_n, j)?;
        let (it, res) = report_parts(&rep);
        diag.mqs_iterations = it;
        diag.mqs_residual = res;
        diag.divergence = self.monitor.evaluate(&a1);
        diag.divergence_scale = self.monitor.scale(&a1);
        diag.a_norm = norm2(&a1);
        Ok(a1)
    }
}

fn wrap(n: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Step {
        step: n,
        source: Box::new(e),
    }
}

/// Runs the scenario in the mode it selects.
pub fn run(scenario: &Scenario, options: &RunOptions) -> Result<History> {
    run_observed(scenario, options, |_, _| Ok(()))
}

/// Like [`run`], calling `observer(previous, current)` for every new level.
pub fn run_observed(
    scenario: &Scenario,
    options: &RunOptions,
    observer: impl FnMut(&SimulationState, &SimulationState) -> Result<()>,
) -> Result<History> {
    match scenario.mode {
        Mode::TwoLoop => run_two_loop_observed(scenario, options, observer),
        Mode::Interleaved => run_interleaved_observed(scenario, options, observer),
    }
}

pub fn run_interleaved(scenario: &Scenario, options: &RunOptions) -> Result<History> {
    run_interleaved_observed(scenario, options, |_, _| Ok(()))
}

pub fn run_two_loop(scenario: &Scenario, options: &RunOptions) -> Result<History> {
    run_two_loop_observed(scenario, options, |_, _| Ok(()))
}

struct Recorder<'o, F> {
    retention: Retention,
    n_end: usize,
    states: Vec<SimulationState>,
    observer: &'o mut F,
}

impl<F: FnMut(&SimulationState, &SimulationState) -> Result<()>> Recorder<'_, F> {
    fn push(&mut self, prev: &SimulationState, cur: &SimulationState) -> Result<()> {
        (self.observer)(prev, cur)?;
        if self.retention.keeps(cur.n, self.n_end) {
            self.states.push(cur.clone());
        }
        Ok(())
    }
}

fn run_interleaved_observed(
    scenario: &Scenario,
    options: &RunOptions,
    mut observer: impl FnMut(&SimulationState, &SimulationState) -> Result<()>,
) -> Result<History> {
    let start = Instant::now();
    let stepper = Stepper::new(scenario)?;
    let mut state = stepper.initial_state().map_err(wrap(0))?;
    let mut diagnostics = vec![StepDiagnostics::initial(0.0, &state.phi, &state.a)];
    let mut rec = Recorder {
        retention: options.retention.clone(),
        n_end: scenario.n_end,
        states: Vec::new(),
        observer: &mut observer,
    };
    if rec.retention.keeps(0, scenario.n_end) {
        rec.states.push(state.clone());
    }
    for n in 0..scenario.n_end - 1 {
        let (phi1, j, mut diag) = stepper.eqs_step(n, &state.phi).map_err(wrap(n + 1))?;
        let a1 = stepper.mqs_step(&state.a, &j, &mut diag).map_err(wrap(n + 1))?;
        let next = SimulationState {
            n: n + 1,
            t: diag.t,
            phi: phi1,
            a: a1,
            j_total: Some(j),
        };
        rec.push(&state, &next).map_err(wrap(n + 1))?;
        diagnostics.push(diag);
        state = next;
    }
    Ok(History {
        dt: scenario.dt,
        scheme: scenario.scheme,
        mode: Mode::Interleaved,
        states: rec.states,
        diagnostics,
        warnings: scenario.warnings(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Storage of the per-step output of the first loop.
enum Spill {
    Memory(Vec<(Vec<f64>, Vec<f64>)>),
    File { file: BufWriter<File>, path: PathBuf },
}

impl Spill {
    fn new(dir: Option<&PathBuf>) -> Result<Self> {
        match dir {
            None => Ok(Spill::Memory(Vec::new())),
            Some(d) => {
                std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
                let path = d.join(format!("loop1-{}.spill", std::process::id()));
                let file = File::options()
                    .create(true)
                    .truncate(true)
                    .read(true)
                    .write(true)
                    .open(&path)
                    .map_err(|e| Error::io(&path, e))?;
                Ok(Spill::File {
                    file: BufWriter::new(file),
                    path,
                })
            }
        }
    }

    fn push(&mut self, phi: Vec<f64>, j: Vec<f64>) -> Result<()> {
        match self {
            Spill::Memory(v) => v.push((phi, j)),
            Spill::File { file, path } => {
                for x in phi.iter().chain(&j) {
                    file.write_all(&x.to_le_bytes()).map_err(|e| Error::io(&*path, e))?;
                }
            }
        }
        Ok(())
    }

    fn into_reader(self, nn: usize, ne: usize) -> Result<Box<dyn Iterator<Item = Result<(Vec<f64>, Vec<f64>)>>>> {
        match self {
            Spill::Memory(v) => Ok(Box::new(v.into_iter().map(Ok))),
            Spill::File { file, path } => {
                let mut f = file.into_inner().map_err(|e| Error::io(&path, e.into_error()))?;
                f.seek(SeekFrom::Start(0)).map_err(|e| Error::io(&path, e))?;
                // the file is unlinked up front; the open handle keeps it readable
                let _ = std::fs::remove_file(&path);
                let mut reader = BufReader::new(f);
                let mut done = false;
                Ok(Box::new(std::iter::from_fn(move || {
                    if done {
                        return None;
                    }
                    let mut read = |len: usize| -> std::io::Result<Option<Vec<f64>>> {
                        let mut buf = vec![0u8; 8 * len];
                        match reader.read_exact(&mut buf) {
                            Ok(()) => Ok(Some(
                                buf.chunks_exact(8)
                                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                                    .collect(),
                            )),
                            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Ok(None),
                            Err(e) => Err(e),
                        }
                    };
                    let item = (|| -> std::io::Result<Option<(Vec<f64>, Vec<f64>)>> {
                        let Some(phi) = read(nn)? else { return Ok(None) };
                        let Some(j) = read(ne)? else {
                            return Err(std::io::ErrorKind::UnexpectedEof.into());
                        };
                        Ok(Some((phi, j)))
                    })();
                    match item {
                        Ok(Some(v)) => Some(Ok(v)),
                        Ok(None) => {
                            done = true;
                            None
                        }
                        Err(e) => {
                            done = true;
                            Some(Err(Error::Format {
                                path: "loop-1 spill file".into(),
                                reason: e.to_string(),
                            }))
                        }
                    }
                })))
            }
        }
    }
}

fn run_two_loop_observed(
    scenario: &Scenario,
    options: &RunOptions,
    mut observer: impl FnMut(&SimulationState, &SimulationState) -> Result<()>,
) -> Result<History> {
    let start = Instant::now();
    let stepper = Stepper::new(scenario)?;
    let initial = stepper.initial_state().map_err(wrap(0))?;
    let mut diagnostics = vec![StepDiagnostics::initial(0.0, &initial.phi, &initial.a)];

    // loop 1: potentials and total currents for all levels
    let mut spill = Spill::new(options.spill_dir.as_ref())?;
    let mut phi = initial.phi.clone();
    for n in 0..scenario.n_end - 1 {
        let (phi1, j, diag) = stepper.eqs_step(n, &phi).map_err(wrap(n + 1))?;
        diagnostics.push(diag);
        spill.push(phi1.clone(), j)?;
        phi = phi1;
    }

    // loop 2: vector potential driven by the stored currents
    let mut rec = Recorder {
        retention: options.retention.clone(),
        n_end: scenario.n_end,
        states: Vec::new(),
        observer: &mut observer,
    };
    if rec.retention.keeps(0, scenario.n_end) {
        rec.states.push(initial.clone());
    }
    let mut state = initial;
    let reader = spill.into_reader(scenario.grid.num_nodes(), scenario.grid.num_edges())?;
    for (n, item) in reader.enumerate() {
        let (phi1, j) = item.map_err(wrap(n + 1))?;
        let a1 = stepper
            .mqs_step(&state.a, &j, &mut diagnostics[n + 1])
            .map_err(wrap(n + 1))?;
        let next = SimulationState {
            n: n + 1,
            t: diagnostics[n + 1].t,
            phi: phi1,
            a: a1,
            j_total: Some(j),
        };
        rec.push(&state, &next).map_err(wrap(n + 1))?;
        state = next;
    }
    Ok(History {
        dt: scenario.dt,
        scheme: scenario.scheme,
        mode: Mode::TwoLoop,
        states: rec.states,
        diagnostics,
        warnings: scenario.warnings(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::KAPPA_COPPER;
    use proptest::prelude::*;

    #[test]
    fn excitation_samples() {
        assert_eq!(excitation(0.0, 12.0, 1e7), 0.0);
        assert!((excitation(2.5e-8, 12.0, 1e7) - 3.0).abs() <= 4.0 * f64::EPSILON * 3.0);
        assert!((excitation(1.25e-7, 12.0, 1e7) - 12.0).abs() <= 4.0 * f64::EPSILON * 12.0);
    }

    proptest! {
        #[test]
        fn excitation_saturates_after_one_period(t in 0.0f64..1e-5, f in 1e3f64..1e9, v in -100.0f64..100.0) {
            let value = excitation(t, v, f);
            prop_assert!(value.abs() <= v.abs() * (1.0 + 1e-15));
            if t >= 1.0 / f {
                let sat = v * (2.0 * std::f64::consts::PI * f * t).sin();
                prop_assert!((value - sat).abs() <= 1e-12 * v.abs().max(1e-300));
            }
        }
    }

    fn cube(n: usize) -> StructuredGrid {
        StructuredGrid::new(n, n, n, 1e-3, 1e-3, 1e-3).unwrap()
    }

    fn small_loop(mode: Mode, scheme: Scheme, solver: SolverSettings, phi_max: f64) -> Scenario {
        let g = cube(5);
        let ext = g.extent();
        let regions = vec![
            MaterialRegion::vacuum([0.0; 3], ext),
            MaterialRegion::new([1e-3, 1e-3, 0.0], [2e-3, 2e-3, 2e-3], KAPPA_COPPER, 1.0, 1.0),
            MaterialRegion::new([1e-3, 1e-3, 2e-3], [3e-3, 2e-3, 2e-3], KAPPA_COPPER, 1.0, 1.0),
            MaterialRegion::new([2e-3, 1e-3, 2e-3], [3e-3, 2e-3, 4e-3], KAPPA_COPPER, 1.0, 1.0),
        ];
        let top: Vec<usize> = (0..g.num_nodes()).filter(|&i| g.node_coords(i)[2] == 4).collect();
        Scenario {
            electrodes: Electrodes::with_grounded_rest(&g, &top).unwrap(),
            grid: g,
            regions,
            excitation: Excitation::ramped(phi_max, 1e7),
            dt: 2.5e-9,
            n_end: 11,
            scheme,
            mode,
            regularization: Regularization::default(),
            stabilized: true,
            solver,
            source: None,
        }
    }

    #[test]
    fn single_level_returns_initial_state() {
        let mut sc = small_loop(Mode::TwoLoop, Scheme::Euler, SolverSettings::direct(), 12.0);
        sc.n_end = 1;
        let h = run(&sc, &RunOptions::default()).unwrap();
        assert_eq!(h.states.len(), 1);
        assert_eq!(h.diagnostics.len(), 1);
        assert!(h.states[0].phi.iter().all(|v| *v == 0.0));
        assert!(h.states[0].a.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_excitation_gives_zero_history() {
        for mode in [Mode::TwoLoop, Mode::Interleaved] {
            let sc = small_loop(mode, Scheme::Trapezoidal, SolverSettings::default(), 0.0);
            let h = run(&sc, &RunOptions::default()).unwrap();
            for s in &h.states {
                assert!(s.phi.iter().chain(&s.a).all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn modes_agree_bitwise_with_direct_solver() {
        for scheme in [Scheme::Euler, Scheme::Trapezoidal] {
            let a = run(&small_loop(Mode::TwoLoop, scheme, SolverSettings::direct(), 12.0), &RunOptions::default()).unwrap();
            let b = run(&small_loop(Mode::Interleaved, scheme, SolverSettings::direct(), 12.0), &RunOptions::default()).unwrap();
            assert_eq!(a.states, b.states);
            assert!(a.last().a.iter().any(|v| *v != 0.0));
        }
    }

    #[test]
    fn spilled_two_loop_matches_in_memory() {
        let dir = tempfile::tempdir().unwrap();
        let sc = small_loop(Mode::TwoLoop, Scheme::Trapezoidal, SolverSettings::direct(), 12.0);
        let mem = run(&sc, &RunOptions::default()).unwrap();
        let disk = run(
            &sc,
            &RunOptions {
                retention: Retention::All,
                spill_dir: Some(dir.path().to_path_buf()),
            },
        )
        .unwrap();
        assert_eq!(mem.states, disk.states);
    }

    #[test]
    fn two_loop_matches_standalone_steps() {
        let sc = small_loop(Mode::TwoLoop, Scheme::Euler, SolverSettings::direct(), 12.0);
        let h = run(&sc, &RunOptions::default()).unwrap();
        let opts = sc.step_options();
        let m = sc.materials().unwrap();
        let eqs = assemble_eqs(&sc.grid, &m, &sc.electrodes, &opts).unwrap();
        let mqs = assemble_mqs(&sc.grid, &m, &opts).unwrap();
        let mut phi = vec![0.0; sc.grid.num_nodes()];
        let mut a = vec![0.0; sc.grid.num_edges()];
        for n in 0..10 {
            let (phi1, _) = eqs.advance(&phi, sc.excitation.value((n + 1) as f64 * sc.dt), None, None).unwrap();
            let j = eqs.total_current(n + 1, &phi1, &phi, None, None).unwrap();
            let (a1, _) = mqs.advance(&a, &j.j).unwrap();
            assert_eq!(h.states[n + 1].phi, phi1);
            assert_eq!(h.states[n + 1].a, a1);
            phi = phi1;
            a = a1;
        }
    }

    #[test]
    fn iterative_modes_agree_to_tolerance() {
        let a = run(&small_loop(Mode::TwoLoop, Scheme::Trapezoidal, SolverSettings::default(), 12.0), &RunOptions::default()).unwrap();
        let b = run(&small_loop(Mode::Interleaved, Scheme::Trapezoidal, SolverSettings::default(), 12.0), &RunOptions::default()).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            for (u, v) in [(&x.phi, &y.phi), (&x.a, &y.a)] {
                let d = norm2(&u.iter().zip(v).map(|(p, q)| p - q).collect::<Vec<_>>());
                assert!(d <= 10.0 * 1e-10 * norm2(u).max(f64::MIN_POSITIVE));
            }
        }
    }

    #[test]
    fn retention_policies() {
        let sc = small_loop(Mode::Interleaved, Scheme::Euler, SolverSettings::direct(), 12.0);
        let last = run(&sc, &RunOptions { retention: Retention::Last(2), spill_dir: None }).unwrap();
        assert_eq!(last.states.iter().map(|s| s.n).collect::<Vec<_>>(), vec![9, 10]);
        let around = run(
            &sc,
            &RunOptions {
                retention: Retention::Around([4].into_iter().collect()),
                spill_dir: None,
            },
        )
        .unwrap();
        assert_eq!(around.states.iter().map(|s| s.n).collect::<Vec<_>>(), vec![2, 3, 4, 5, 10]);
        assert_eq!(last.diagnostics.len(), 11);
    }

    #[test]
    fn large_domain_warns() {
        let mut sc = small_loop(Mode::Interleaved, Scheme::Euler, SolverSettings::direct(), 1.0);
        assert!(sc.warnings().is_empty());
        sc.excitation.frequency = 1e10;
        let w = sc.warnings();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].code, "quasistatic-validity");
    }

    #[test]
    fn failing_step_reports_index() {
        let mut sc = small_loop(Mode::Interleaved, Scheme::Euler, SolverSettings::cg(1e-10), 12.0);
        sc.solver.max_iter = Some(1);
        match run(&sc, &RunOptions::default()) {
            Err(Error::Step { step, .. }) => assert_eq!(step, 1),
            other => panic!("expected a step failure, got {other:?}"),
        }
    }
}
