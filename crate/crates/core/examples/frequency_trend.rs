//! Darwin against full Maxwell on the loop at t = 3.125/f over a frequency
//! sweep. The E_irr column is the electroquasistatic field alone.
//!
//! cargo run --release --example frequency_trend -- [FREQ_HZ ...]

use darwin_fit::orchestrator::{Excitation, Mode};
use darwin_fit::scenarios::{LoopCoil, Timing};
use darwin_fit::study::compare_at;

fn main() -> darwin_fit::Result<()> {
    let mut freqs: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if freqs.is_empty() {
        freqs = vec![1e5, 1e6, 1e7];
    }
    println!("{:>10} {:>8} {:>12} {:>12} {:>12} {:>8}", "f [Hz]", "n", "E", "E_irr", "B", "wall");
    for f in freqs {
        let sc = LoopCoil {
            excitation: Excitation::ramped(12.0, f),
            ..LoopCoil::default()
        }
        .build(Timing {
            mode: Mode::Interleaved,
            ..Timing::default()
        })?;
        let r = compare_at(&sc, 3.125 / f)?;
        let c = r.comparison;
        println!(
            "{f:>10.0e} {:>8} {:>12.4e} {:>12.4e} {:>12.4e} {:>7.1}s",
            r.n, c.e.value, c.e_irr.value, c.b.value, r.wall_time
        );
    }
    Ok(())
}
