//! Regularized magneto-quasistatic curl-curl step driven by the total current.

use crate::error::{Error, Result};
use crate::eqs::StepOptions;
use crate::grid::{build_curl, build_gradient, IncidenceMatrix, StructuredGrid};
use crate::linalg::{weighted_gram, ConstrainedSystem, PreparedSolver, SolveReport};
use crate::materials::MaterialAssembly;

/// Eliminated system `[θ Cᵀ M_ν C + M_κ̂/Δt] aⁿ⁺¹ = f₂` on interior edges;
/// boundary edges carry zero tangential vector potential.
#[derive(Debug)]
pub struct MqsSystem {
    curl: IncidenceMatrix,
    m_nu: Vec<f64>,
    m_kappa_hat: Vec<f64>,
    dt: f64,
    theta: f64,
    constrained: ConstrainedSystem<f64>,
    solver: Option<PreparedSolver<f64>>,
}

pub fn assemble_mqs(grid: &StructuredGrid, materials: &MaterialAssembly, options: &StepOptions) -> Result<MqsSystem> {
    options.validate()?;
    if materials.num_edges() != grid.num_edges() || materials.m_nu.len() != grid.num_faces() {
        return Err(Error::Dimension {
            expected: grid.num_edges(),
            got: materials.num_edges(),
            context: "material assembly",
        });
    }
    if materials.m_kappa_hat.iter().any(|k| !(*k > 0.0)) {
        return Err(Error::Config("regularized conductance must be positive on every edge".into()));
    }
    let curl = build_curl(grid);
    let dt = materials.dt;
    let nu: Vec<f64> = materials.m_nu.iter().map(|v| options.theta * v).collect();
    let mass: Vec<f64> = materials.m_kappa_hat.iter().map(|k| k / dt).collect();
    let k = weighted_gram(&curl, &nu).add_diagonal(&mass);
    let boundary: Vec<bool> = (0..grid.num_edges()).map(|e| grid.is_boundary_edge(e)).collect();
    let constrained = ConstrainedSystem::new(&k, &boundary)?;
    let solver = if constrained.free().is_empty() {
        None
    } else {
        Some(PreparedSolver::new(constrained.free_matrix().clone(), &options.solver)?)
    };
    Ok(MqsSystem {
        curl,
        m_nu: materials.m_nu.clone(),
        m_kappa_hat: materials.m_kappa_hat.clone(),
        dt,
        theta: options.theta,
        constrained,
        solver,
    })
}

impl MqsSystem {
    pub fn matrix(&self) -> &ConstrainedSystem<f64> {
        &self.constrained
    }

    pub fn curl(&self) -> &IncidenceMatrix {
        &self.curl
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `aⁿ → aⁿ⁺¹` with right-hand side
    /// `j̄ + (M_κ̂/Δt) aⁿ − (1−θ) Cᵀ M_ν C aⁿ`.
    pub fn advance(&self, a_n: &[f64], j_total: &[f64]) -> Result<(Vec<f64>, Option<SolveReport>)> {
        let ne = self.curl.cols();
        for (v, context) in [(a_n, "a_n"), (j_total, "total current")] {
            if v.len() != ne {
                return Err(Error::Dimension {
                    expected: ne,
                    got: v.len(),
                    context,
                });
            }
        }
        if a_n.iter().chain(j_total).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("MQS input"));
        }
        let zeros = vec![0.0; ne];
        let Some(solver) = &self.solver else {
            return Ok((zeros, None));
        };
        let mut rhs: Vec<f64> = (0..ne).map(|e| j_total[e] + self.m_kappa_hat[e] / self.dt * a_n[e]).collect();
        if self.theta < 1.0 {
            let flux: Vec<f64> = self
                .curl
                .apply(a_n)
                .iter()
                .zip(&self.m_nu)
                .map(|(b, nu)| (1.0 - self.theta) * nu * b)
                .collect();
            for (r, c) in rhs.iter_mut().zip(self.curl.apply_transpose(&flux)) {
                *r -= c;
            }
        }
        let reduced = self.constrained.reduce_rhs(&rhs, &zeros)?;
        let guess = self.constrained.restrict(a_n);
        let (x, report) = solver.solve(&reduced, Some(&guess))?;
        Ok((self.constrained.expand(&x, &zeros)?, Some(report)))
    }
}

/// Evaluates `‖Gᵀ M_κ a‖_∞` over interior nodes, with the physical (not
/// regularized) conductance.
#[derive(Debug, Clone)]
pub struct DivergenceMonitor {
    gradient: IncidenceMatrix,
    m_kappa: Vec<f64>,
    interior: Vec<usize>,
}

impl DivergenceMonitor {
    pub fn new(grid: &StructuredGrid, materials: &MaterialAssembly) -> Self {
        Self {
            gradient: build_gradient(grid),
            m_kappa: materials.m_kappa.clone(),
            interior: (0..grid.num_nodes())
                .filter(|&i| !grid.is_boundary_node(grid.node_coords(i)))
                .collect(),
        }
    }

    pub fn evaluate(&self, a: &[f64]) -> f64 {
        let ma: Vec<f64> = a.iter().zip(&self.m_kappa).map(|(x, k)| x * k).collect();
        let div = self.gradient.apply_transpose(&ma);
        self.interior.iter().fold(0.0, |m, &i| m.max(div[i].abs()))
    }

    /// `‖M_κ a‖_∞`, the scale against which the monitor is judged.
    pub fn scale(&self, a: &[f64]) -> f64 {
        a.iter().zip(&self.m_kappa).fold(0.0, |m, (x, k)| m.max((x * k).abs()))
    }
}

/// One-shot form of [`DivergenceMonitor::evaluate`].
pub fn divergence_monitor(grid: &StructuredGrid, materials: &MaterialAssembly, a: &[f64]) -> f64 {
    DivergenceMonitor::new(grid, materials).evaluate(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;
    use crate::linalg::dense::DenseMatrix;
    use crate::linalg::{norm2, SolverSettings};
    use crate::materials::{assemble_materials, MaterialRegion, Regularization, KAPPA_COPPER};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vacuum(grid: &StructuredGrid, dt: f64) -> MaterialAssembly {
        assemble_materials(grid, &[MaterialRegion::vacuum([0.0; 3], grid.extent())], Regularization::default(), dt)
            .unwrap()
    }

    fn direct() -> StepOptions {
        StepOptions {
            solver: SolverSettings::direct(),
            ..StepOptions::default()
        }
    }

    fn dense(op: &IncidenceMatrix) -> DenseMatrix<f64> {
        DenseMatrix::from_fn(op.rows(), op.cols(), |r, c| {
            op.row(r).find(|(cc, _)| *cc == c).map_or(0.0, |(_, v)| f64::from(v))
        })
    }

    #[test]
    fn symmetric_on_random_scenes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..4 {
            let g = StructuredGrid::new(4, 3, 5, 1e-3, 1e-3, 2e-3).unwrap();
            let ext = g.extent();
            let lo: [f64; 3] = std::array::from_fn(|d| rng.random_range(0.0..ext[d] / 2.0));
            let regions = vec![
                MaterialRegion::vacuum([0.0; 3], ext),
                MaterialRegion::new(lo, ext, KAPPA_COPPER, 2.0, rng.random_range(1.0..100.0)),
            ];
            let m = assemble_materials(&g, &regions, Regularization::default(), 1e-9).unwrap();
            let sys = assemble_mqs(&g, &m, &StepOptions::default()).unwrap();
            assert_eq!(sys.matrix().free_matrix().max_asymmetry(), 0.0);
        }
    }

    #[test]
    fn matches_dense_curl_curl_oracle() {
        let g = StructuredGrid::new(3, 3, 3, 1e-3, 1e-3, 1e-3).unwrap();
        let m = vacuum(&g, 1e-9);
        let sys = assemble_mqs(&g, &m, &direct()).unwrap();
        let c = dense(&build_curl(&g));
        let nc = DenseMatrix::from_fn(c.nrows(), c.ncols(), |r, k| m.m_nu[r] * c[(r, k)]);
        let mut full = c.transpose().matmul(&nc);
        for e in 0..g.num_edges() {
            full[(e, e)] += m.m_kappa_hat[e] / 1e-9;
        }
        let free = sys.matrix().free();
        let k = sys.matrix().free_matrix();
        for (r, &i) in free.iter().enumerate() {
            for (s, &j) in free.iter().enumerate() {
                assert!((k.get(r, s) - full[(i, j)]).abs() <= 1e-12 * full[(i, i)]);
            }
        }
    }

    #[test]
    fn halving_dt_doubles_mass_term() {
        let g = StructuredGrid::new(3, 3, 3, 1e-3, 1e-3, 1e-3).unwrap();
        let k1 = assemble_mqs(&g, &vacuum(&g, 2e-9), &direct()).unwrap();
        let k2 = assemble_mqs(&g, &vacuum(&g, 1e-9), &direct()).unwrap();
        let cc = weighted_gram(&build_curl(&g), &vacuum(&g, 1e-9).m_nu);
        let free = k1.matrix().free();
        for (r, &i) in free.iter().enumerate() {
            let d1 = k1.matrix().free_matrix().get(r, r) - cc.get(i, i);
            let d2 = k2.matrix().free_matrix().get(r, r) - cc.get(i, i);
            assert!((d2 - 2.0 * d1).abs() <= 1e-9 * d2);
        }
    }

    #[test]
    fn zero_current_keeps_zero_state() {
        let g = StructuredGrid::new(3, 3, 3, 1e-3, 1e-3, 1e-3).unwrap();
        let sys = assemble_mqs(&g, &vacuum(&g, 1e-9), &StepOptions::default()).unwrap();
        let mut a = vec![0.0; g.num_edges()];
        for _ in 0..5 {
            a = sys.advance(&a, &vec![0.0; g.num_edges()]).unwrap().0;
        }
        assert!(a.iter().all(|v| *v == 0.0));
    }

    fn face_loop(g: &StructuredGrid) -> Vec<f64> {
        // circulating current around the single interior face normal to z
        let c = build_curl(g);
        let f = g.face(Axis::Z, [0, 0, 1]);
        let mut j = vec![0.0; g.num_edges()];
        for (e, s) in c.row(f) {
            j[e] = f64::from(s);
        }
        j
    }

    #[test]
    fn face_loop_step_matches_dense_solve() {
        let g = StructuredGrid::new(3, 3, 3, 1e-3, 1e-3, 1e-3).unwrap();
        let m = vacuum(&g, 1e-9);
        let sys = assemble_mqs(&g, &m, &direct()).unwrap();
        let j = face_loop(&g);
        let (a, _) = sys.advance(&vec![0.0; g.num_edges()], &j).unwrap();
        let zeros = vec![0.0; g.num_edges()];
        let rhs = sys.matrix().reduce_rhs(&j, &zeros).unwrap();
        let xd = sys.matrix().free_matrix().to_dense().lu_solve(&rhs).unwrap();
        for (&i, x) in sys.matrix().free().iter().zip(&xd) {
            assert!((a[i] - x).abs() <= 1e-12 * norm2(&xd));
        }
        for e in 0..g.num_edges() {
            if g.is_boundary_edge(e) {
                assert_eq!(a[e], 0.0);
            }
        }
    }

    #[test]
    fn constant_current_converges_to_stationary_solution() {
        let g = StructuredGrid::new(4, 4, 4, 1e-3, 1e-3, 1e-3).unwrap();
        let m = vacuum(&g, 1e-13);
        let sys = assemble_mqs(&g, &m, &direct()).unwrap();
        let j: Vec<f64> = face_loop(&g);
        // fixed point: Cᵀ M_ν C a = j on interior edges
        let cc = weighted_gram(&build_curl(&g), &m.m_nu);
        let mut a = vec![0.0; g.num_edges()];
        let mut changes = Vec::new();
        for _ in 0..200 {
            let (next, _) = sys.advance(&a, &j).unwrap();
            changes.push(norm2(&next.iter().zip(&a).map(|(x, y)| x - y).collect::<Vec<_>>()));
            a = next;
        }
        assert!(changes[..10].windows(2).all(|w| w[1] < w[0]), "{:?}", &changes[..10]);
        let ka = cc.spmv(&a).unwrap();
        for &i in sys.matrix().free() {
            assert!((ka[i] - j[i]).abs() <= 1e-9 * norm2(&j), "edge {i}: {} vs {}", ka[i], j[i]);
        }
    }

    #[test]
    fn monitor_vanishes_on_trivial_inputs() {
        let g = StructuredGrid::new(4, 4, 4, 1e-3, 1e-3, 1e-3).unwrap();
        let m = vacuum(&g, 1e-9);
        assert_eq!(divergence_monitor(&g, &m, &vec![0.0; g.num_edges()]), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi: Vec<f64> = (0..g.num_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = build_gradient(&g).apply(&psi);
        assert_eq!(divergence_monitor(&g, &m, &a), 0.0);
    }
}
