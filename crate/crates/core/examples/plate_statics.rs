//! Parallel-plate capacitor and resistive bar at a constant drive, against
//! their closed forms E = V/d and J = κV/d.

use darwin_fit::fields::FieldRecovery;
use darwin_fit::grid::Axis;
use darwin_fit::orchestrator::{run, RunOptions, Scheme};
use darwin_fit::scenarios::{PlateStack, Timing};

fn main() -> darwin_fit::Result<()> {
    let timing = Timing {
        dt: 1e-3,
        n_end: 21,
        scheme: Scheme::Euler,
        ..Timing::default()
    };
    for (name, p) in [("capacitor", PlateStack::capacitor()), ("resistive bar", PlateStack::resistive_bar())] {
        let sc = p.build(timing)?;
        let h = run(&sc, &RunOptions::default())?;
        let s = FieldRecovery::new(&sc.grid).at_level(&h, sc.n_end - 1)?;
        let ez: Vec<f64> = sc
            .grid
            .edge_range(Axis::Z)
            .map(|e| s.e_total[e])
            .collect();
        let want = p.excitation.phi_max / p.gap();
        let worst = ez.iter().map(|e| (e.abs() - want).abs() / want).fold(0.0, f64::max);
        println!("{name}: V = {} V, gap = {} m", p.excitation.phi_max, p.gap());
        println!("  |E_z| expected {want:.6} V/m, max relative deviation {worst:.2e}");
        if p.kappa > 0.0 {
            println!("  J = {:.6e} A/m^2", p.kappa * want);
        }
    }
    Ok(())
}
