//! Darwin runs measured against the frequency-domain reference.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::fields::{relative_difference, Entity, FieldRecovery, FieldSnapshot, RelativeDifference};
use crate::orchestrator::{run, Retention, RunOptions, Scenario, SimulationState};
use crate::reference::{solve_reference, PhasorSolution};

/// Relative differences of one Darwin snapshot against the reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldComparison {
    pub t: f64,
    /// Total electric field.
    pub e: RelativeDifference,
    /// Darwin `E_irr` alone against the full reference field.
    pub e_irr: RelativeDifference,
    pub b: RelativeDifference,
}

/// Compares `snapshot` with the reference evaluated at the snapshot's time.
pub fn compare_snapshot(scenario: &Scenario, reference: &PhasorSolution, snapshot: &FieldSnapshot) -> Result<FieldComparison> {
    let r = reference.fields_at(snapshot.t);
    let g = &scenario.grid;
    Ok(FieldComparison {
        t: snapshot.t,
        e: relative_difference(g, Entity::Edge, &r.e_total, &snapshot.e_total)?,
        e_irr: relative_difference(g, Entity::Edge, &r.e_total, &snapshot.e_irr)?,
        b: relative_difference(g, Entity::Face, &r.b, &snapshot.b)?,
    })
}

/// Outcome of [`compare_at`].
#[derive(Debug, Clone)]
pub struct ComparisonRun {
    pub frequency: f64,
    /// Level the snapshot was taken at.
    pub n: usize,
    pub comparison: FieldComparison,
    pub snapshot: FieldSnapshot,
    /// Potentials at level `n`.
    pub state: SimulationState,
    pub reference: PhasorSolution,
    /// Wall time of the Darwin run, s.
    pub wall_time: f64,
}

/// Runs `scenario` up to the level nearest `t` (plus one level for the
/// centred difference) and compares it with the reference at the excitation
/// frequency. `n_end` of the scenario is ignored.
pub fn compare_at(scenario: &Scenario, t: f64) -> Result<ComparisonRun> {
    let n = (t / scenario.dt).round();
    if !(1.0..1e9).contains(&n) {
        return Err(Error::Config(format!("sample time {t} s is not after the first step")));
    }
    let n = n as usize;
    let mut sc = scenario.clone();
    sc.n_end = n + 2;
    let history = run(
        &sc,
        &RunOptions {
            retention: Retention::Around(BTreeSet::from([n])),
            spill_dir: None,
        },
    )?;
    let snapshot = FieldRecovery::new(&sc.grid).at_level(&history, n)?;
    let state = history.state(n).cloned().ok_or_else(|| Error::Config(format!("level {n} missing")))?;
    let reference = solve_reference(&sc, sc.excitation.frequency)?;
    Ok(ComparisonRun {
        frequency: sc.excitation.frequency,
        n,
        comparison: compare_snapshot(&sc, &reference, &snapshot)?,
        snapshot,
        state,
        reference,
        wall_time: history.wall_time,
    })
}
