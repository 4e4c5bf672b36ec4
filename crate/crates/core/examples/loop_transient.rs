//! Transient run of the single-turn loop: per-step diagnostics and the field
//! energy split between the irrotational and remaining parts.
//!
//! cargo run --release --example loop_transient -- [euler|trapezoidal] [two-loop|interleaved]

use darwin_fit::fields::FieldRecovery;
use darwin_fit::linalg::norm2;
use darwin_fit::orchestrator::{run, Mode, RunOptions, Scheme};
use darwin_fit::scenarios::{LoopCoil, Timing};

fn main() -> darwin_fit::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let scheme = match args.first().map(String::as_str) {
        Some("euler") => Scheme::Euler,
        _ => Scheme::Trapezoidal,
    };
    let mode = match args.get(1).map(String::as_str) {
        Some("interleaved") => Mode::Interleaved,
        _ => Mode::TwoLoop,
    };
    let sc = LoopCoil::default().build(Timing {
        scheme,
        mode,
        ..Timing::default()
    })?;
    println!(
        "grid {:?} nodes, dt = {:e} s, {} levels, {scheme:?}/{mode:?}",
        sc.grid.nodes_per_axis(),
        sc.dt,
        sc.n_end
    );
    for w in sc.warnings() {
        println!("warning [{}]: {}", w.code, w.message);
    }
    let h = run(&sc, &RunOptions::default())?;
    let rec = FieldRecovery::new(&sc.grid);
    println!("{:>5} {:>12} {:>12} {:>12} {:>12} {:>10}", "n", "t", "|E_irr|", "|E_rem|", "|B|", "div");
    for n in (25..sc.n_end).step_by(40) {
        let s = rec.at_level(&h, n)?;
        let d = &h.diagnostics[n];
        println!(
            "{n:>5} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>10.2e}",
            s.t,
            norm2(&s.e_irr),
            norm2(&s.e_rem),
            norm2(&s.b),
            d.divergence / d.divergence_scale.max(f64::MIN_POSITIVE)
        );
    }
    println!(
        "max divergence ratio {:.3e}, wall time {:.2} s",
        h.max_divergence_ratio(),
        h.wall_time
    );
    Ok(())
}
