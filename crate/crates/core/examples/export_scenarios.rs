//! Writes the built-in scenarios as TOML files for the command-line tool.
//!
//! cargo run --example export_scenarios -- [DIR]

use std::path::PathBuf;

use darwin_fit::orchestrator::{Excitation, Mode, Scheme};
use darwin_fit::scenarios::{LoopCoil, PlateStack, Timing};

fn main() -> darwin_fit::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/scenarios")));
    std::fs::create_dir_all(&dir).map_err(|e| darwin_fit::Error::io(&dir, e))?;

    let timing = Timing::default();
    let mut coil = LoopCoil::default().to_file(timing)?;
    coil.output.sample_times = vec![3.125e-7];
    let mut capacitor = PlateStack::capacitor().to_file(Timing {
        n_end: 21,
        ..timing
    })?;
    capacitor.time.scheme = Scheme::Euler;
    capacitor.time.dt = 1e-3;
    let bar = PlateStack {
        excitation: Excitation::ramped(1.0, 1e7),
        ..PlateStack::resistive_bar()
    }
    .to_file(Timing {
        n_end: 161,
        mode: Mode::Interleaved,
        ..timing
    })?;

    for (name, file) in [("loop", coil), ("capacitor", capacitor), ("bar", bar)] {
        let path = dir.join(format!("{name}.toml"));
        darwin_fit::io::write_atomic(&path, file.to_toml()?.as_bytes())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
