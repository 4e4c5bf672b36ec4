use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use darwin_fit::cli::Comparison;
use darwin_fit::io::output::parse_diagnostics_csv;
use darwin_fit::io::{grid_fingerprint, read_json, FieldDump, RunSummary, ScenarioFile};
use darwin_fit::scenarios::{LoopCoil, PlateStack, Timing};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/scenarios").join(name)
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_darwin-fit"))
        .args(args)
        .output()
        .expect("spawn darwin-fit")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_variant(dir: &Path, name: &str, edit: impl FnOnce(&mut ScenarioFile)) -> PathBuf {
    let mut f = ScenarioFile::load(scenario("bar.toml")).unwrap();
    edit(&mut f);
    let p = dir.join(name);
    std::fs::write(&p, f.to_toml().unwrap()).unwrap();
    p
}

#[test]
fn shipped_scenarios_match_the_builders() {
    let t = Timing::default();
    let lp = ScenarioFile::load(scenario("loop.toml")).unwrap().build().unwrap();
    let direct = LoopCoil::default().build(t).unwrap();
    assert_eq!(grid_fingerprint(&lp.grid, &lp.regions), grid_fingerprint(&direct.grid, &direct.regions));
    assert_eq!(lp.electrodes, direct.electrodes);
    let cap = ScenarioFile::load(scenario("capacitor.toml")).unwrap().build().unwrap();
    assert_eq!(cap.electrodes, PlateStack::capacitor().build(t).unwrap().electrodes);
    assert!(ScenarioFile::load(scenario("bar.toml")).unwrap().build().is_ok());
}

#[test]
fn run_reference_compare_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let (run_dir, ref_dir) = (tmp.path().join("run"), tmp.path().join("ref"));
    let bar = scenario("bar.toml");
    let t = "3.125e-7";

    let o = cli(&["run", "--config", s(&bar), "--out", s(&run_dir), "--at-time", t]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: RunSummary = read_json(run_dir.join("summary.json")).unwrap();
    assert_eq!(summary.n_end, 161);
    assert_eq!(summary.snapshots.len(), 2);
    assert!(run_dir.join("diagnostics.csv").exists());
    assert!(run_dir.join(summary.snapshots[0].vtk.as_ref().unwrap()).exists());
    let dump = FieldDump::read(run_dir.join(&summary.snapshots[0].file)).unwrap();
    assert_eq!(dump.fingerprint, summary.fingerprint);
    assert_eq!(dump.t, 125.0 * 2.5e-9);

    let o = cli(&["reference", "--config", s(&bar), "--out", s(&ref_dir)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(ref_dir.join("phasors.fit").exists());

    let o = cli(&["compare", s(&run_dir), s(&ref_dir), "--out", s(tmp.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("E_irr"), "{stdout}");
    let cmp: Comparison = read_json(tmp.path().join("comparison.json")).unwrap();
    let e = cmp.row("E").unwrap().relative_difference;
    assert!(e > 0.0 && e < 1e-2, "{e}");
    assert!(std::fs::read_to_string(tmp.path().join("comparison.csv")).unwrap().starts_with("quantity,"));

    // no snapshot near the requested time
    let o = cli(&["compare", s(&run_dir), s(&ref_dir), "--at-time", "1e-7"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn compare_rejects_a_different_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let other = write_variant(tmp.path(), "finer.toml", |f| f.grid.spacing[0] *= 0.5);
    let (run_dir, ref_dir) = (tmp.path().join("run"), tmp.path().join("ref"));
    assert_eq!(code(&cli(&["run", "--config", s(&scenario("bar.toml")), "--out", s(&run_dir)])), 0);
    assert_eq!(code(&cli(&["reference", "--config", s(&other), "--out", s(&ref_dir)])), 0);
    let o = cli(&["compare", s(&run_dir), s(&ref_dir)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("fingerprint"));
}

#[test]
fn single_level_and_zero_drive_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let one = write_variant(tmp.path(), "one.toml", |f| f.time.n_end = 1);
    let dir = tmp.path().join("one");
    assert_eq!(code(&cli(&["run", "--config", s(&one), "--out", s(&dir)])), 0);
    let summary: RunSummary = read_json(dir.join("summary.json")).unwrap();
    assert!(summary.snapshots.is_empty());
    assert_eq!((summary.final_phi_norm, summary.final_a_norm), (0.0, 0.0));

    let zero = write_variant(tmp.path(), "zero.toml", |f| f.excitation.phi_max = 0.0);
    let dir = tmp.path().join("zero");
    assert_eq!(code(&cli(&["run", "--config", s(&zero), "--out", s(&dir), "--dump-fields", "all"])), 0);
    let summary: RunSummary = read_json(dir.join("summary.json")).unwrap();
    assert_eq!(summary.snapshots.len(), 160);
    assert_eq!((summary.final_phi_norm, summary.final_a_norm), (0.0, 0.0));
    let ref_dir = tmp.path().join("zero-ref");
    assert_eq!(code(&cli(&["reference", "--config", s(&zero), "--out", s(&ref_dir)])), 0);
    // the relative difference is undefined against a zero reference
    assert_eq!(code(&cli(&["compare", s(&dir), s(&ref_dir), "--at-time", "3.125e-7"])), 1);
}

#[test]
fn overrides_and_dump_levels() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("r");
    let o = cli(&[
        "run", "--config", s(&scenario("bar.toml")), "--out", s(&dir),
        "--scheme", "euler", "--mode", "two-loop", "--tol", "1e-9", "--freq", "2e7", "--dump-fields", "none",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: RunSummary = read_json(dir.join("summary.json")).unwrap();
    assert!(summary.snapshots.is_empty());
    assert_eq!(summary.scenario.excitation.frequency, 2e7);
    assert_eq!(summary.scenario.solver.tol, 1e-9);
    assert_eq!(format!("{:?}", summary.scheme), "Euler");
}

#[test]
fn loop_diagnostics_have_one_row_per_level_within_tolerance() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["run", "--config", s(&scenario("loop.toml")), "--out", s(tmp.path()), "--dump-fields", "none"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(tmp.path().join("diagnostics.csv")).unwrap();
    let rows = parse_diagnostics_csv(&text, "diagnostics.csv").unwrap();
    assert_eq!(rows.len(), 481);
    for r in &rows {
        assert!(r.eqs_residual <= 1e-10 && r.mqs_residual <= 1e-10, "{r:?}");
        assert!(r.solenoidality <= 1e-8 * r.flux_scale, "{r:?}");
    }
}

#[test]
fn check_reports_pass_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["check", "--config", s(&scenario("loop.toml")), "--out", s(tmp.path()), "--steps", "20"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{stdout}");
    for name in ["operator-identity", "material-positivity", "divergence-preservation", "solenoidal-current"] {
        assert!(stdout.lines().any(|l| l.starts_with("PASS") && l.contains(name)), "{stdout}");
    }
    assert!(tmp.path().join("check.json").exists());
}

#[test]
fn invalid_input_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    assert_eq!(code(&cli(&["run", "--config", "/nonexistent/s.toml", "--out", s(&out)])), 3);
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[grid]\nnodes = [3, 3]\n").unwrap();
    let o = cli(&["run", "--config", s(&bad), "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("configuration error") && err.contains("line 2"), "{err}");
    assert_eq!(code(&cli(&["run", "--config", s(&scenario("bar.toml")), "--scheme", "rk4"])), 1);
    let o = cli(&["run", "--config", s(&scenario("bar.toml")), "--out", s(&out), "--at-time", "1.0"]);
    assert_eq!(code(&o), 1);
    let neg = write_variant(tmp.path(), "neg.toml", |f| f.time.dt = -1.0);
    assert_eq!(code(&cli(&["run", "--config", s(&neg), "--out", s(&out)])), 1);
    assert_eq!(code(&cli(&["reference", "--config", s(&scenario("bar.toml")), "--out", s(&out), "--freq", "0"])), 1);
    assert_eq!(code(&cli(&["--help"])), 0);
}
