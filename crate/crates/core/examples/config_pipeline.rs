//! The command-line pipeline driven from code: run and reference from a
//! scenario file, then compare the two artifact directories.
//!
//! cargo run --release --example config_pipeline -- [SCENARIO.toml] [OUT_DIR]

use std::path::PathBuf;

use darwin_fit::cli::{compare_command, reference_command, run_command, CompareArgs, ReferenceArgs, RunArgs, ScenarioArgs};

fn main() -> darwin_fit::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/scenarios/loop.toml")));
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("darwin-fit-pipeline"));
    let scenario = ScenarioArgs {
        config,
        tol: None,
        freq: None,
    };

    let run = run_command(&RunArgs {
        scenario: scenario.clone(),
        out: Some(out.join("run")),
        scheme: None,
        mode: None,
        dump_fields: None,
        at_time: Vec::new(),
    })?;
    println!("run: {} levels in {:.2} s, {} snapshot(s)", run.n_end, run.wall_time, run.snapshots.len());
    let reference = reference_command(&ReferenceArgs {
        scenario,
        out: Some(out.join("reference")),
        at_time: Vec::new(),
    })?;
    println!("reference: residual {:.2e}", reference.residual);
    let cmp = compare_command(&CompareArgs {
        run_dir: out.join("run"),
        reference_dir: out.join("reference"),
        at_time: None,
        out: Some(out.clone()),
    })?;
    print!("{}", cmp.table());
    println!("artifacts in {}", out.display());
    Ok(())
}
