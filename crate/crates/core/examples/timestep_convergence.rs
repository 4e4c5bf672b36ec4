//! Time-step refinement at 10 MHz: error against the reference at
//! t = 1200 ns and the observed order from successive halvings.

use darwin_fit::linalg::norm2;
use darwin_fit::orchestrator::{Mode, Scheme};
use darwin_fit::scenarios::{LoopCoil, Timing};
use darwin_fit::study::compare_at;

fn main() -> darwin_fit::Result<()> {
    for scheme in [Scheme::Euler, Scheme::Trapezoidal] {
        println!("{scheme:?}");
        println!("{:>10} {:>12} {:>12}", "dt [ns]", "E", "B");
        let mut ends = Vec::new();
        for dt in [2.5e-9, 1.25e-9, 0.625e-9] {
            let sc = LoopCoil::default().build(Timing {
                dt,
                scheme,
                mode: Mode::Interleaved,
                ..Timing::default()
            })?;
            let r = compare_at(&sc, 1.2e-6)?;
            println!("{:>10} {:>12.4e} {:>12.4e}", dt * 1e9, r.comparison.e.value, r.comparison.b.value);
            ends.push(r.state);
        }
        let diff = |i: usize| {
            let d: Vec<f64> = ends[i].a.iter().zip(&ends[i + 1].a).map(|(x, y)| x - y).collect();
            norm2(&d)
        };
        println!("  observed order in a: {:.3}", (diff(0) / diff(1)).log2());
    }
    Ok(())
}
