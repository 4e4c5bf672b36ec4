//! Electro-quasistatic potential step and the solenoidal total current that
//! drives the magnetic step.

use crate::error::{Error, Result};
use crate::grid::{build_gradient, IncidenceMatrix, StructuredGrid};
use crate::linalg::{weighted_gram, ConstrainedSystem, PreparedSolver, SolveReport, SolverSettings};
use crate::materials::MaterialAssembly;

/// Dirichlet node sets: `excited` follows the excitation, `grounded` is held at 0 V.
#[derive(Debug, Clone, PartialEq)]
pub struct Electrodes {
    excited: Vec<bool>,
    grounded: Vec<bool>,
}

impl Electrodes {
    /// Both sets must be disjoint, lie on the domain boundary, and not both be empty.
    pub fn new(grid: &StructuredGrid, excited: &[usize], grounded: &[usize]) -> Result<Self> {
        let n = grid.num_nodes();
        let mut ex = vec![false; n];
        let mut gr = vec![false; n];
        for (set, mask, name) in [(excited, &mut ex, "excited"), (grounded, &mut gr, "grounded")] {
            for &i in set {
                if i >= n {
                    return Err(Error::Config(format!("{name} electrode node {i} outside grid of {n} nodes")));
                }
                if !grid.is_boundary_node(grid.node_coords(i)) {
                    return Err(Error::Config(format!(
                        "{name} electrode node {i} at {:?} is not on the domain boundary",
                        grid.node_coords(i)
                    )));
                }
                mask[i] = true;
            }
        }
        if let Some(i) = (0..n).find(|&i| ex[i] && gr[i]) {
            return Err(Error::Config(format!(
                "node {i} at {:?} is both excited and grounded",
                grid.node_coords(i)
            )));
        }
        if !ex.iter().chain(&gr).any(|b| *b) {
            return Err(Error::Config(
                "no Dirichlet nodes: the potential would float (define excited or grounded electrodes)".into(),
            ));
        }
        Ok(Self {
            excited: ex,
            grounded: gr,
        })
    }

    /// Every boundary node not in `excited` is grounded.
    pub fn with_grounded_rest(grid: &StructuredGrid, excited: &[usize]) -> Result<Self> {
        let mut ex = vec![false; grid.num_nodes()];
        for &i in excited {
            if i < ex.len() {
                ex[i] = true;
            }
        }
        let grounded: Vec<usize> = (0..grid.num_nodes())
            .filter(|&i| !ex[i] && grid.is_boundary_node(grid.node_coords(i)))
            .collect();
        Self::new(grid, excited, &grounded)
    }

    pub fn num_nodes(&self) -> usize {
        self.excited.len()
    }

    pub fn is_excited(&self, i: usize) -> bool {
        self.excited[i]
    }

    pub fn is_grounded(&self, i: usize) -> bool {
        self.grounded[i]
    }

    pub fn is_fixed(&self, i: usize) -> bool {
        self.excited[i] || self.grounded[i]
    }

    pub fn fixed_mask(&self) -> Vec<bool> {
        (0..self.num_nodes()).map(|i| self.is_fixed(i)).collect()
    }

    pub fn num_excited(&self) -> usize {
        self.excited.iter().filter(|b| **b).count()
    }

    pub fn num_grounded(&self) -> usize {
        self.grounded.iter().filter(|b| **b).count()
    }

    /// True when every boundary node carries a Dirichlet value.
    pub fn covers_boundary(&self, grid: &StructuredGrid) -> bool {
        (0..self.num_nodes()).all(|i| self.is_fixed(i) || !grid.is_boundary_node(grid.node_coords(i)))
    }

    /// Nodal vector of Dirichlet data: `v` on excited nodes, zero elsewhere.
    pub fn prescribed(&self, v: f64) -> Vec<f64> {
        self.excited.iter().map(|&e| if e { v } else { 0.0 }).collect()
    }
}

/// Assembly options shared by both steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    /// 1 for implicit Euler, ½ for the trapezoidal rule.
    pub theta: f64,
    /// Use the regularized conductance in the potential equation.
    pub stabilized: bool,
    pub solver: SolverSettings,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            theta: 1.0,
            stabilized: true,
            solver: SolverSettings::default(),
        }
    }
}

impl StepOptions {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.theta >= 0.5 && self.theta <= 1.0) {
            return Err(Error::Config(format!("theta = {} must lie in [0.5, 1]", self.theta)));
        }
        self.solver.validate()
    }
}

/// Eliminated potential equation `Gᵀ[θ M_κ̂ + M_ε/Δt] G φⁿ⁺¹ = f₁`.
#[derive(Debug)]
pub struct EqsSystem {
    gradient: IncidenceMatrix,
    conductance: Vec<f64>,
    m_eps: Vec<f64>,
    dt: f64,
    theta: f64,
    electrodes: Electrodes,
    constrained: ConstrainedSystem<f64>,
    solver: Option<PreparedSolver<f64>>,
}

/// Total current of one step and its discrete divergence at free nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalCurrent {
    /// Amperes through dual faces, one entry per edge.
    pub j: Vec<f64>,
    /// Step index of the end of the interval.
    pub n: usize,
    /// `‖Gᵀ j‖_∞` over non-Dirichlet nodes.
    pub solenoidality: f64,
    /// `‖M_σ G φⁿ⁺¹‖_∞`, the scale of the solenoidality bound. For θ < 1 the
    /// current also carries `φⁿ`, so the larger of both levels is used.
    pub flux_scale: f64,
}

pub fn assemble_eqs(
    grid: &StructuredGrid,
    materials: &MaterialAssembly,
    electrodes: &Electrodes,
    options: &StepOptions,
) -> Result<EqsSystem> {
    options.validate()?;
    if electrodes.num_nodes() != grid.num_nodes() {
        return Err(Error::Dimension {
            expected: grid.num_nodes(),
            got: electrodes.num_nodes(),
            context: "electrode mask",
        });
    }
    if materials.num_edges() != grid.num_edges() {
        return Err(Error::Dimension {
            expected: grid.num_edges(),
            got: materials.num_edges(),
            context: "material assembly",
        });
    }
    let gradient = build_gradient(grid);
    let conductance = materials.eqs_conductance(options.stabilized).to_vec();
    let dt = materials.dt;
    let weights: Vec<f64> = conductance
        .iter()
        .zip(&materials.m_eps)
        .map(|(k, e)| options.theta * k + e / dt)
        .collect();
    let k = weighted_gram(&gradient, &weights);
    let constrained = ConstrainedSystem::new(&k, &electrodes.fixed_mask())?;
    let solver = if constrained.free().is_empty() {
        None
    } else {
        Some(PreparedSolver::new(constrained.free_matrix().clone(), &options.solver)?)
    };
    Ok(EqsSystem {
        gradient,
        conductance,
        m_eps: materials.m_eps.clone(),
        dt,
        theta: options.theta,
        electrodes: electrodes.clone(),
        constrained,
        solver,
    })
}

fn zip_avg(theta: f64, js_np1: Option<&[f64]>, js_n: Option<&[f64]>, len: usize) -> Option<Vec<f64>> {
    match (js_np1, js_n) {
        (None, None) => None,
        (a, b) => {
            let a = a.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; len]);
            let b = b.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; len]);
            Some(a.iter().zip(&b).map(|(x, y)| theta * x + (1.0 - theta) * y).collect())
        }
    }
}

impl EqsSystem {
    pub fn matrix(&self) -> &ConstrainedSystem<f64> {
        &self.constrained
    }

    pub fn electrodes(&self) -> &Electrodes {
        &self.electrodes
    }

    pub fn gradient(&self) -> &IncidenceMatrix {
        &self.gradient
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Conductance used by the system (regularized unless stabilization is off).
    pub fn conductance(&self) -> &[f64] {
        &self.conductance
    }

    fn check_edges(&self, v: Option<&[f64]>, context: &'static str) -> Result<()> {
        match v {
            Some(v) if v.len() != self.gradient.rows() => Err(Error::Dimension {
                expected: self.gradient.rows(),
                got: v.len(),
                context,
            }),
            _ => Ok(()),
        }
    }

    /// Advances `φⁿ → φⁿ⁺¹`. `v_np1` is the excited-electrode potential at
    /// `tⁿ⁺¹`; source currents are optional edge vectors at `tⁿ` and `tⁿ⁺¹`.
    pub fn advance(
        &self,
        phi_n: &[f64],
        v_np1: f64,
        js_n: Option<&[f64]>,
        js_np1: Option<&[f64]>,
    ) -> Result<(Vec<f64>, Option<SolveReport>)> {
        let nn = self.gradient.cols();
        if phi_n.len() != nn {
            return Err(Error::Dimension {
                expected: nn,
                got: phi_n.len(),
                context: "phi_n",
            });
        }
        self.check_edges(js_n, "source current at t_n")?;
        self.check_edges(js_np1, "source current at t_n+1")?;
        if phi_n.iter().any(|v| !v.is_finite()) || !v_np1.is_finite() {
            return Err(Error::NonFinite("EQS input"));
        }
        let prescribed = self.electrodes.prescribed(v_np1);
        let Some(solver) = &self.solver else {
            return Ok((prescribed, None));
        };
        let gphi = self.gradient.apply(phi_n);
        let mut edge_rhs: Vec<f64> = gphi
            .iter()
            .zip(self.m_eps.iter().zip(&self.conductance))
            .map(|(g, (e, k))| (e / self.dt - (1.0 - self.theta) * k) * g)
            .collect();
        if let Some(js) = zip_avg(self.theta, js_np1, js_n, edge_rhs.len()) {
            for (r, s) in edge_rhs.iter_mut().zip(&js) {
                *r += s;
            }
        }
        let rhs_full = self.gradient.apply_transpose(&edge_rhs);
        let rhs = self.constrained.reduce_rhs(&rhs_full, &prescribed)?;
        let guess = self.constrained.restrict(phi_n);
        let (x, report) = solver.solve(&rhs, Some(&guess))?;
        Ok((self.constrained.expand(&x, &prescribed)?, Some(report)))
    }

    /// Step-averaged total current
    /// `j̄ = j̄_s − M_κ̂ G(θφⁿ⁺¹ + (1−θ)φⁿ) − (M_ε/Δt) G(φⁿ⁺¹ − φⁿ)`,
    /// which reduces to `j_s − M_σ G φⁿ⁺¹ + (M_ε/Δt) G φⁿ` for θ = 1.
    pub fn total_current(
        &self,
        n_np1: usize,
        phi_np1: &[f64],
        phi_n: &[f64],
        js_n: Option<&[f64]>,
        js_np1: Option<&[f64]>,
    ) -> Result<TotalCurrent> {
        self.check_edges(js_n, "source current at t_n")?;
        self.check_edges(js_np1, "source current at t_n+1")?;
        let g1 = self.gradient.apply(phi_np1);
        let g0 = self.gradient.apply(phi_n);
        let th = self.theta;
        let mut j: Vec<f64> = (0..g1.len())
            .map(|e| {
                -self.conductance[e] * (th * g1[e] + (1.0 - th) * g0[e]) - self.m_eps[e] / self.dt * (g1[e] - g0[e])
            })
            .collect();
        if let Some(js) = zip_avg(th, js_np1, js_n, j.len()) {
            for (r, s) in j.iter_mut().zip(&js) {
                *r += s;
            }
        }
        let div = self.gradient.apply_transpose(&j);
        let solenoidality = self
            .constrained
            .free()
            .iter()
            .fold(0.0f64, |m, &i| m.max(div[i].abs()));
        let scale = |g: &[f64]| {
            g.iter()
                .enumerate()
                .fold(0.0f64, |m, (e, g)| m.max(((self.conductance[e] + self.m_eps[e] / self.dt) * g).abs()))
        };
        let mut flux_scale = scale(&g1);
        if th < 1.0 {
            flux_scale = flux_scale.max(scale(&g0));
        }
        Ok(TotalCurrent {
            j,
            n: n_np1,
            solenoidality,
            flux_scale,
        })
    }

    /// Stationary conduction solve `Gᵀ M_κ̂ G φ = Gᵀ j_s` with Dirichlet data,
    /// used for the initial state.
    pub fn stationary(&self, v: f64, js: Option<&[f64]>, settings: &SolverSettings) -> Result<Vec<f64>> {
        self.check_edges(js, "source current")?;
        let prescribed = self.electrodes.prescribed(v);
        if self.constrained.free().is_empty() || (v == 0.0 && js.is_none_or(|j| j.iter().all(|x| *x == 0.0))) {
            return Ok(prescribed);
        }
        let k = weighted_gram(&self.gradient, &self.conductance);
        let sys = ConstrainedSystem::new(&k, &self.electrodes.fixed_mask())?;
        let rhs_full = match js {
            Some(j) => self.gradient.apply_transpose(j),
            None => vec![0.0; self.gradient.cols()],
        };
        let rhs = sys.reduce_rhs(&rhs_full, &prescribed)?;
        let solver = PreparedSolver::new(sys.free_matrix().clone(), settings)?;
        let (x, _) = solver.solve(&rhs, None)?;
        sys.expand(&x, &prescribed)
    }
}
