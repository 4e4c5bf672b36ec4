//! Full-Maxwell A–φ frequency-domain reference on the same grid and operators.
//!
//! The A–φ system is singular along gradient directions (gauge freedom). It is
//! solved block-triangularly in the gauge `Gᵀ(jωM_κ̂ − ω²M_ε) â = 0` at interior
//! nodes: first the potential equation
//! `Gᵀ(M_κ̂ + jωM_ε)G φ̂ = Gᵀ ĵ_s`, then the wave equation
//! `(CᵀM_νC + jωM_κ̂ − ω²M_ε) â = ĵ_s − (M_κ̂ + jωM_ε)G φ̂`.
//! Applying `Gᵀ` to the second recovers the divergence equation exactly at
//! interior nodes, so the pair solves the full system whenever every boundary
//! node is a Dirichlet node.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::FieldSnapshot;
use crate::grid::{build_curl, build_gradient};
use crate::linalg::{norm2, weighted_gram, ConstrainedSystem, PreparedSolver, SolveReport};
use crate::orchestrator::{Scenario, Warning};

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Time-harmonic solution with its derived field phasors.
#[derive(Debug, Clone)]
pub struct PhasorSolution {
    pub frequency: f64,
    pub omega: f64,
    /// Nodal potential phasors, V.
    pub phi: Vec<Complex64>,
    /// Edge vector-potential phasors, V·s.
    pub a: Vec<Complex64>,
    /// `−G φ̂` per edge length, V/m.
    pub e_irr: Vec<Complex64>,
    /// `−jω â` per edge length, V/m.
    pub e_rem: Vec<Complex64>,
    /// `C â`, Wb.
    pub b: Vec<Complex64>,
    /// Relative residual of the assembled A–φ system (edge and free-node rows).
    pub residual: f64,
    /// Whether the gauge choice reproduces the full system exactly.
    pub gauge_exact: bool,
    pub reports: Vec<SolveReport>,
    pub warnings: Vec<Warning>,
}

/// Complex field phasors at one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasorFields {
    pub e_total: Vec<Complex64>,
    pub e_irr: Vec<Complex64>,
    pub e_rem: Vec<Complex64>,
    pub b: Vec<Complex64>,
}

impl PhasorSolution {
    /// `F̂ e^{jωt}` for every field.
    pub fn fields_at(&self, t: f64) -> PhasorFields {
        let rot = Complex64::from_polar(1.0, self.omega * t);
        let turn = |v: &[Complex64]| v.iter().map(|x| x * rot).collect::<Vec<_>>();
        let e_irr = turn(&self.e_irr);
        let e_rem = turn(&self.e_rem);
        PhasorFields {
            e_total: e_irr.iter().zip(&e_rem).map(|(x, y)| x + y).collect(),
            e_irr,
            e_rem,
            b: turn(&self.b),
        }
    }

    /// Real time-domain fields `Re(F̂ e^{jωt})`.
    pub fn time_sample(&self, t: f64) -> FieldSnapshot {
        let f = self.fields_at(t);
        let re = |v: &[Complex64]| v.iter().map(|x| x.re).collect::<Vec<_>>();
        FieldSnapshot {
            t,
            e_total: re(&f.e_total),
            e_irr: re(&f.e_irr),
            e_rem: re(&f.e_rem),
            b: re(&f.b),
        }
    }
}

/// Solves the time-harmonic problem driven by the steady part of the
/// scenario's excitation at `frequency`.
///
/// The ramped sine `φ_max sin(ωt)` is `Re(−jφ_max e^{jωt})`, so the electrode
/// phasor is `−jφ_max`; a source pattern gets the same phase.
pub fn solve_reference(scenario: &Scenario, frequency: f64) -> Result<PhasorSolution> {
    if !(frequency.is_finite() && frequency > 0.0) {
        return Err(Error::Config(format!("reference frequency {frequency} must be positive")));
    }
    scenario.validate()?;
    let grid = &scenario.grid;
    let m = scenario.materials()?;
    let omega = 2.0 * std::f64::consts::PI * frequency;
    let g = build_gradient(grid);
    let c = build_curl(grid);
    let ne = grid.num_edges();
    let nn = grid.num_nodes();

    let drive = Complex64::new(0.0, -scenario.excitation.phi_max);
    let js: Vec<Complex64> = match &scenario.source {
        Some(p) => p.iter().map(|v| Complex64::new(0.0, -v)).collect(),
        None => vec![Complex64::default(); ne],
    };
    // conduction + displacement admittance and the part acting on â
    let w_phi: Vec<Complex64> = (0..ne)
        .map(|e| Complex64::new(m.m_kappa_hat[e], omega * m.m_eps[e]))
        .collect();
    let w_a: Vec<Complex64> = (0..ne)
        .map(|e| Complex64::new(-omega * omega * m.m_eps[e], omega * m.m_kappa_hat[e]))
        .collect();

    let mut warnings = Vec::new();
    let ratio = (0..ne)
        .map(|e| omega * m.m_eps[e] / m.m_kappa_hat[e])
        .fold(0.0f64, f64::max);
    if ratio >= 1.0 {
        warnings.push(Warning {
            code: "reference-resonance",
            message: format!("displacement term exceeds the regularizing conductance by {ratio:.3e}; the reference may be near resonance"),
            value: ratio,
        });
    }
    let gauge_exact = scenario.electrodes.covers_boundary(grid);
    if !gauge_exact {
        warnings.push(Warning {
            code: "reference-gauge",
            message: "boundary nodes without Dirichlet data: the reference is exact only at interior nodes".into(),
            value: 0.0,
        });
    }

    let mut reports = Vec::new();
    let prescribed: Vec<Complex64> = (0..nn)
        .map(|i| if scenario.electrodes.is_excited(i) { drive } else { Complex64::default() })
        .collect();
    let fixed = scenario.electrodes.fixed_mask();

    // potential
    let k_phi = weighted_gram(&g, &w_phi);
    let sys_phi = ConstrainedSystem::new(&k_phi, &fixed)?;
    let rhs_phi_full = g.apply_transpose(&js);
    let phi = if sys_phi.free().is_empty() {
        prescribed.clone()
    } else {
        let rhs = sys_phi.reduce_rhs(&rhs_phi_full, &prescribed)?;
        let solver = PreparedSolver::new(sys_phi.free_matrix().clone(), &scenario.solver)?;
        let (x, rep) = solver.solve(&rhs, None)?;
        reports.push(rep);
        sys_phi.expand(&x, &prescribed)?
    };

    // vector potential
    let gphi = g.apply(&phi);
    let drive_a: Vec<Complex64> = (0..ne).map(|e| js[e] - w_phi[e] * gphi[e]).collect();
    let k_a = weighted_gram(&c, &m.m_nu.iter().map(|v| Complex64::new(*v, 0.0)).collect::<Vec<_>>()).add_diagonal(&w_a);
    let boundary: Vec<bool> = (0..ne).map(|e| grid.is_boundary_edge(e)).collect();
    let sys_a = ConstrainedSystem::new(&k_a, &boundary)?;
    let zeros = vec![Complex64::default(); ne];
    let a = if sys_a.free().is_empty() {
        zeros.clone()
    } else {
        let rhs = sys_a.reduce_rhs(&drive_a, &zeros)?;
        let solver = PreparedSolver::new(sys_a.free_matrix().clone(), &scenario.solver)?;
        let (x, rep) = solver.solve(&rhs, None)?;
        reports.push(rep);
        sys_a.expand(&x, &zeros)?
    };

    // residual of the coupled system
    let ka = k_a.spmv(&a)?;
    let wg: Vec<Complex64> = (0..ne).map(|e| w_phi[e] * gphi[e]).collect();
    let mut r = Vec::new();
    let mut scale = Vec::new();
    for e in sys_a.free() {
        r.push(js[*e] - ka[*e] - wg[*e]);
        scale.push(wg[*e]);
    }
    let node_flux: Vec<Complex64> = (0..ne).map(|e| w_a[e] * a[e] + wg[e]).collect();
    let div = g.apply_transpose(&node_flux);
    let div_scale = g.apply_transpose(&wg);
    for i in sys_phi.free() {
        r.push(rhs_phi_full[*i] - div[*i]);
        scale.push(div_scale[*i]);
    }
    let denom = norm2(&scale) + norm2(&js);
    let residual = if denom == 0.0 { norm2(&r) } else { norm2(&r) / denom };

    let len: Vec<f64> = (0..ne).map(|e| grid.edge_length(grid.edge_coords(e).0)).collect();
    let e_irr = (0..ne).map(|e| -gphi[e] / len[e]).collect();
    let e_rem = (0..ne).map(|e| -J * omega * a[e] / len[e]).collect();
    let b = c.apply(&a);
    Ok(PhasorSolution {
        frequency,
        omega,
        phi,
        a,
        e_irr,
        e_rem,
        b,
        residual,
        gauge_exact,
        reports,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eqs::Electrodes;
    use crate::grid::StructuredGrid;
    use crate::linalg::{dense::DenseMatrix, SolverSettings};
    use crate::materials::{MaterialRegion, Regularization, KAPPA_COPPER};
    use crate::orchestrator::{Excitation, Mode, Scheme};

    fn scenario(regions: Vec<MaterialRegion>, grid: StructuredGrid, phi_max: f64, f: f64) -> Scenario {
        let top: Vec<usize> = (0..grid.num_nodes())
            .filter(|&i| grid.node_coords(i)[2] == grid.nodes_per_axis()[2] - 1)
            .collect();
        Scenario {
            electrodes: Electrodes::with_grounded_rest(&grid, &top).unwrap(),
            grid,
            regions,
            excitation: Excitation::ramped(phi_max, f),
            dt: 2.5e-9,
            n_end: 2,
            scheme: Scheme::Trapezoidal,
            mode: Mode::TwoLoop,
            regularization: Regularization::default(),
            stabilized: true,
            solver: SolverSettings::direct(),
            source: None,
        }
    }

    fn loop5() -> Scenario {
        let g = StructuredGrid::new(5, 5, 5, 1e-3, 1e-3, 1e-3).unwrap();
        let regions = vec![
            MaterialRegion::vacuum([0.0; 3], g.extent()),
            MaterialRegion::new([1e-3, 1e-3, 0.0], [2e-3, 2e-3, 2e-3], KAPPA_COPPER, 1.0, 1.0),
            MaterialRegion::new([1e-3, 1e-3, 2e-3], [3e-3, 2e-3, 2e-3], KAPPA_COPPER, 1.0, 1.0),
            MaterialRegion::new([2e-3, 1e-3, 2e-3], [3e-3, 2e-3, 4e-3], KAPPA_COPPER, 1.0, 1.0),
        ];
        scenario(regions, g, 12.0, 1e5)
    }

    #[test]
    fn zero_drive_gives_zero_solution() {
        let mut sc = loop5();
        sc.excitation.phi_max = 0.0;
        let s = solve_reference(&sc, 1e5).unwrap();
        assert!(s.phi.iter().chain(&s.a).all(|v| *v == Complex64::default()));
    }

    #[test]
    fn rejects_non_positive_frequency() {
        assert!(solve_reference(&loop5(), 0.0).is_err());
        assert!(solve_reference(&loop5(), -1.0).is_err());
    }

    #[test]
    fn low_frequency_resistor_is_static() {
        let g = StructuredGrid::new(3, 3, 5, 1e-3, 1e-3, 1e-3).unwrap();
        let sc = scenario(vec![MaterialRegion::new([0.0; 3], g.extent(), KAPPA_COPPER, 1.0, 1.0)], g, 1.0, 1e-3);
        let s = solve_reference(&sc, 1e-3).unwrap();
        // static conduction: interior potential follows the DC solution
        let m = sc.materials().unwrap();
        let grad = build_gradient(&sc.grid);
        let k = weighted_gram(&grad, &m.m_kappa_hat);
        let sys = ConstrainedSystem::new(&k, &sc.electrodes.fixed_mask()).unwrap();
        let pres = sc.electrodes.prescribed(1.0);
        let rhs = sys.reduce_rhs(&vec![0.0; sc.grid.num_nodes()], &pres).unwrap();
        let dc = sys.expand(&sys.free_matrix().to_dense().ldlt_solve(&rhs).unwrap(), &pres).unwrap();
        for (p, d) in s.phi.iter().zip(&dc) {
            assert!((p - Complex64::new(0.0, -d)).norm() <= 1e-6);
        }
        let e_rem = norm2(&s.e_rem);
        let e_irr = norm2(&s.e_irr);
        assert!(e_rem <= 1e-6 * e_irr, "{e_rem:e} vs {e_irr:e}");
    }

    #[test]
    fn loop_residual_and_dense_oracle() {
        let sc = loop5();
        let s = solve_reference(&sc, 1e5).unwrap();
        assert!(s.gauge_exact);
        assert!(s.residual <= 1e-10, "residual {:e}", s.residual);
        // dense complex solve of the monolithic system for the same gauge
        let m = sc.materials().unwrap();
        let g = build_gradient(&sc.grid);
        let c = build_curl(&sc.grid);
        let ne = sc.grid.num_edges();
        let w = 2.0 * std::f64::consts::PI * 1e5;
        let free_e: Vec<usize> = (0..ne).filter(|&e| !sc.grid.is_boundary_edge(e)).collect();
        let free_n: Vec<usize> = (0..sc.grid.num_nodes()).filter(|&i| !sc.electrodes.is_fixed(i)).collect();
        let n = free_e.len() + free_n.len();
        let mut a = DenseMatrix::<Complex64>::zeros(n, n);
        let mut rhs = vec![Complex64::default(); n];
        let pres: Vec<Complex64> = sc.electrodes.prescribed(12.0).iter().map(|v| Complex64::new(0.0, -v)).collect();
        let wphi = |e: usize| Complex64::new(m.m_kappa_hat[e], w * m.m_eps[e]);
        let node_col = |i: usize| free_n.iter().position(|&x| x == i);
        // edge rows: curl-curl + mass on â, admittance·G on φ̂
        for (r, &e) in free_e.iter().enumerate() {
            for (cc, &e2) in free_e.iter().enumerate() {
                let mut v = Complex64::default();
                for f in 0..sc.grid.num_faces() {
                    let s1 = c.row(f).find(|(x, _)| *x == e).map_or(0.0, |(_, s)| f64::from(s));
                    let s2 = c.row(f).find(|(x, _)| *x == e2).map_or(0.0, |(_, s)| f64::from(s));
                    v += Complex64::new(m.m_nu[f] * s1 * s2, 0.0);
                }
                if e == e2 {
                    v += Complex64::new(-w * w * m.m_eps[e], w * m.m_kappa_hat[e]);
                }
                a[(r, cc)] = v;
            }
            for (node, s) in g.row(e) {
                let val = wphi(e) * f64::from(s);
                match node_col(node) {
                    Some(k) => a[(r, free_e.len() + k)] += val,
                    None => rhs[r] -= val * pres[node],
                }
            }
        }
        // gauge rows at free nodes: Gᵀ(M_κ̂ + jωM_ε)G φ̂ = 0
        for (r, &i) in free_n.iter().enumerate() {
            let row = free_e.len() + r;
            for e in 0..ne {
                let Some((_, si)) = g.row(e).find(|(x, _)| *x == i) else { continue };
                for (node, s) in g.row(e) {
                    let val = wphi(e) * f64::from(si) * f64::from(s);
                    match node_col(node) {
                        Some(k) => a[(row, free_e.len() + k)] += val,
                        None => rhs[row] -= val * pres[node],
                    }
                }
            }
        }
        let x = a.lu_solve(&rhs).unwrap();
        // gradient components of â are weakly determined; its curl is not
        let scale = norm2(&x[..free_e.len()]);
        let mut a_dense = vec![Complex64::default(); ne];
        for (k, &e) in free_e.iter().enumerate() {
            assert!((x[k] - s.a[e]).norm() <= 1e-6 * scale, "edge {e}");
            a_dense[e] = x[k];
        }
        let b_dense = c.apply(&a_dense);
        let diff: Vec<Complex64> = b_dense.iter().zip(&s.b).map(|(x, y)| x - y).collect();
        assert!(norm2(&diff) <= 1e-9 * norm2(&b_dense));
        for (k, &i) in free_n.iter().enumerate() {
            assert!((x[free_e.len() + k] - s.phi[i]).norm() <= 1e-8 * 12.0);
        }
    }

    #[test]
    fn sampling_phase() {
        let s = solve_reference(&loop5(), 1e5).unwrap();
        let t0 = s.time_sample(0.0);
        let half = s.time_sample(0.5 / 1e5);
        for (x, y) in t0.e_total.iter().zip(&s.fields_at(0.0).e_total) {
            assert_eq!(*x, y.re);
        }
        for (x, y) in t0.b.iter().zip(&half.b) {
            assert!((x + y).abs() <= 1e-12 * norm2(&t0.b).max(1e-300));
        }
        // the excited electrode follows sin(ωt): zero at t = 0
        let m = s.phi.iter().fold(0.0f64, |m, v| m.max(v.re.abs()));
        assert!(m <= 1e-9 * 12.0);
    }

    #[test]
    fn system_is_complex_symmetric() {
        let sc = loop5();
        let m = sc.materials().unwrap();
        let w = 2.0 * std::f64::consts::PI * 1e5;
        let c = build_curl(&sc.grid);
        let nu: Vec<Complex64> = m.m_nu.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        let diag: Vec<Complex64> = (0..sc.grid.num_edges())
            .map(|e| Complex64::new(-w * w * m.m_eps[e], w * m.m_kappa_hat[e]))
            .collect();
        let k = weighted_gram(&c, &nu).add_diagonal(&diag);
        assert_eq!(k.max_asymmetry(), 0.0);
        // not Hermitian
        let herm = k.triplets().any(|(r, cc, v)| (v - k.get(cc, r).conj()).norm() > 0.0);
        assert!(herm);
    }
}
