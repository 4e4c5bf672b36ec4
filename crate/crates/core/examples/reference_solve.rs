//! Frequency-domain full-Maxwell reference for the loop, and its time samples
//! over one period.
//!
//! cargo run --release --example reference_solve -- [FREQ_HZ]

use darwin_fit::linalg::norm2;
use darwin_fit::orchestrator::Excitation;
use darwin_fit::reference::solve_reference;
use darwin_fit::scenarios::{LoopCoil, Timing};

fn main() -> darwin_fit::Result<()> {
    let f: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1e7);
    let sc = LoopCoil {
        excitation: Excitation::ramped(12.0, f),
        ..LoopCoil::default()
    }
    .build(Timing::default())?;
    let sol = solve_reference(&sc, f)?;
    println!("f = {f:e} Hz, residual {:.2e}, gauge exact: {}", sol.residual, sol.gauge_exact);
    for r in &sol.reports {
        println!("  solve: {}, {} iterations, residual {:.2e}", r.method, r.iterations, r.relative_residual);
    }
    for w in &sol.warnings {
        println!("warning [{}]: {}", w.code, w.message);
    }
    println!("{:>8} {:>12} {:>12} {:>12}", "phase", "|E_irr|", "|E_rem|", "|B|");
    for k in 0..8 {
        let t = k as f64 / (8.0 * f);
        let s = sol.time_sample(t);
        println!(
            "{:>8} {:>12.4e} {:>12.4e} {:>12.4e}",
            format!("{k}/8"),
            norm2(&s.e_irr),
            norm2(&s.e_rem),
            norm2(&s.b)
        );
    }
    Ok(())
}
