//! Box-primitive material regions and the diagonal FIT material matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, StructuredGrid};

/// Vacuum permittivity in F/m (CODATA 2018).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Vacuum permeability in H/m (CODATA 2018).
pub const MU_0: f64 = 1.256_637_062_12e-6;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Electrical conductivity of copper, S/m.
pub const KAPPA_COPPER: f64 = 5.96e7;
/// Default artificial conductivity of non-conducting cells, S/m.
pub const DEFAULT_KAPPA_HAT: f64 = 1e-2;

/// Axis-aligned box carrying homogeneous material parameters.
///
/// A cell belongs to the box when its centre lies inside the closed box.
/// Later regions override earlier ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialRegion {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Lower corner in metres.
    pub min: [f64; 3],
    /// Upper corner in metres.
    pub max: [f64; 3],
    /// Electric conductivity, S/m.
    #[serde(default)]
    pub kappa: f64,
    #[serde(default = "one")]
    pub epsilon_r: f64,
    #[serde(default = "one")]
    pub mu_r: f64,
}

fn one() -> f64 {
    1.0
}

impl MaterialRegion {
    pub fn new(min: [f64; 3], max: [f64; 3], kappa: f64, epsilon_r: f64, mu_r: f64) -> Self {
        Self {
            name: None,
            min,
            max,
            kappa,
            epsilon_r,
            mu_r,
        }
    }

    pub fn vacuum(min: [f64; 3], max: [f64; 3]) -> Self {
        Self::new(min, max, 0.0, 1.0, 1.0)
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    fn label(&self, idx: usize) -> String {
        match &self.name {
            Some(n) => format!("region {idx} ({n})"),
            None => format!("region {idx}"),
        }
    }

    fn validate(&self, idx: usize, extent: [f64; 3]) -> Result<()> {
        let label = self.label(idx);
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::Config(format!("{label}: kappa = {} must be >= 0", self.kappa)));
        }
        if !(self.epsilon_r.is_finite() && self.epsilon_r >= 1.0) {
            return Err(Error::Config(format!(
                "{label}: epsilon_r = {} must be >= 1",
                self.epsilon_r
            )));
        }
        if !(self.mu_r.is_finite() && self.mu_r > 0.0) {
            return Err(Error::Config(format!("{label}: mu_r = {} must be > 0", self.mu_r)));
        }
        for d in 0..3 {
            if !(self.min[d].is_finite() && self.max[d].is_finite()) || self.min[d] > self.max[d] {
                return Err(Error::Config(format!("{label}: box bounds are inverted or not finite")));
            }
            if self.max[d] < 0.0 || self.min[d] > extent[d] {
                return Err(Error::Config(format!("{label}: box does not intersect the grid domain")));
            }
        }
        Ok(())
    }

    fn contains(&self, x: [f64; 3]) -> bool {
        (0..3).all(|d| self.min[d] <= x[d] && x[d] <= self.max[d])
    }
}

/// How the artificial conductivity of non-conducting cells is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Regularization {
    /// Fixed conductivity `kappa_hat` (S/m) wherever the physical one is lower.
    Constant { kappa_hat: f64 },
    /// `kappa_hat = epsilon / dt` per cell.
    EpsOverDt,
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization::Constant {
            kappa_hat: DEFAULT_KAPPA_HAT,
        }
    }
}

impl Regularization {
    fn cell_kappa_hat(&self, epsilon: f64, dt: f64) -> f64 {
        match *self {
            Regularization::Constant { kappa_hat } => kappa_hat,
            Regularization::EpsOverDt => epsilon / dt,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Regularization::Constant { kappa_hat } if !(kappa_hat.is_finite() && kappa_hat > 0.0) => Err(
                Error::Config(format!("kappa_hat = {kappa_hat} must be positive")),
            ),
            _ => Ok(()),
        }
    }
}

/// Per-cell material parameters after region painting.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMaterials {
    pub kappa: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub nu: Vec<f64>,
}

/// Paints regions onto cells; every cell must be covered by some region.
pub fn paint_cells(grid: &StructuredGrid, regions: &[MaterialRegion]) -> Result<CellMaterials> {
    let extent = grid.extent();
    for (idx, r) in regions.iter().enumerate() {
        r.validate(idx, extent)?;
    }
    let h = grid.spacing();
    let n = grid.num_cells();
    let mut out = CellMaterials {
        kappa: vec![0.0; n],
        epsilon: vec![0.0; n],
        nu: vec![0.0; n],
    };
    for c in 0..n {
        let p = grid.cell_coords(c);
        let centre = [
            (p[0] as f64 + 0.5) * h[0],
            (p[1] as f64 + 0.5) * h[1],
            (p[2] as f64 + 0.5) * h[2],
        ];
        let Some(region) = regions.iter().rev().find(|r| r.contains(centre)) else {
            return Err(Error::Config(format!(
                "cell {c} at {p:?} is not covered by any material region (a background region is required)"
            )));
        };
        out.kappa[c] = region.kappa;
        out.epsilon[c] = EPSILON_0 * region.epsilon_r;
        out.nu[c] = 1.0 / (MU_0 * region.mu_r);
    }
    Ok(out)
}

/// Diagonal material matrices of one scenario at one time-step length.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialAssembly {
    /// Reluctance per face, `ν · dual length / face area`.
    pub m_nu: Vec<f64>,
    /// Conductance per edge, `κ · dual area / edge length`.
    pub m_kappa: Vec<f64>,
    /// Capacitance per edge, `ε · dual area / edge length`.
    pub m_eps: Vec<f64>,
    /// Regularized conductance per edge, `max(κ, κ̂)` painted per cell.
    pub m_kappa_hat: Vec<f64>,
    pub dt: f64,
    pub regularization: Regularization,
}

/// Assembles all material matrices for `grid` painted with `regions`.
pub fn assemble_materials(
    grid: &StructuredGrid,
    regions: &[MaterialRegion],
    regularization: Regularization,
    dt: f64,
) -> Result<MaterialAssembly> {
    regularization.validate()?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("time step dt = {dt} must be positive")));
    }
    let cells = paint_cells(grid, regions)?;
    let kappa_hat_cells: Vec<f64> = cells
        .kappa
        .iter()
        .zip(&cells.epsilon)
        .map(|(&k, &e)| k.max(regularization.cell_kappa_hat(e, dt)))
        .collect();

    let quarter = 0.25 * grid.cell_volume();
    let ne = grid.num_edges();
    let mut m_kappa = vec![0.0; ne];
    let mut m_eps = vec![0.0; ne];
    let mut m_kappa_hat = vec![0.0; ne];
    for e in 0..ne {
        let (a, _) = grid.edge_coords(e);
        let l2 = grid.edge_length(a).powi(2);
        // quarter cell volume / L² = quarter cross-section / L
        for c in grid.edge_cells(e) {
            m_kappa[e] += cells.kappa[c] * quarter / l2;
            m_eps[e] += cells.epsilon[c] * quarter / l2;
            m_kappa_hat[e] += kappa_hat_cells[c] * quarter / l2;
        }
    }

    let nf = grid.num_faces();
    let mut m_nu = vec![0.0; nf];
    for f in 0..nf {
        let (a, _) = grid.face_coords(f);
        let half = 0.5 * grid.spacing()[a.index()] / grid.face_area(a);
        for c in grid.face_cells(f) {
            m_nu[f] += cells.nu[c] * half;
        }
    }

    Ok(MaterialAssembly {
        m_nu,
        m_kappa,
        m_eps,
        m_kappa_hat,
        dt,
        regularization,
    })
}

impl MaterialAssembly {
    pub fn num_edges(&self) -> usize {
        self.m_kappa.len()
    }

    /// `M_σ = M_κ + M_ε / Δt`, optionally with the regularized conductance.
    pub fn m_sigma(&self, regularized: bool) -> Vec<f64> {
        let kappa = if regularized { &self.m_kappa_hat } else { &self.m_kappa };
        kappa.iter().zip(&self.m_eps).map(|(k, e)| k + e / self.dt).collect()
    }

    /// Conductance used by the EQS step.
    pub fn eqs_conductance(&self, stabilized: bool) -> &[f64] {
        if stabilized {
            &self.m_kappa_hat
        } else {
            &self.m_kappa
        }
    }
}

/// Partition of edges by physical (unregularized) conductivity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeClassification {
    pub conductive: Vec<bool>,
}

impl EdgeClassification {
    pub fn num_conductive(&self) -> usize {
        self.conductive.iter().filter(|c| **c).count()
    }

    pub fn num_non_conductive(&self) -> usize {
        self.conductive.len() - self.num_conductive()
    }
}

/// An edge is conductive iff its unregularized conductance is positive.
pub fn classify_edges(assembly: &MaterialAssembly) -> EdgeClassification {
    EdgeClassification {
        conductive: assembly.m_kappa.iter().map(|k| *k > 0.0).collect(),
    }
}

/// Edge metric `dual area / edge length`, the factor relating a cell
/// property to a uniform-material diagonal entry.
pub fn edge_metric(grid: &StructuredGrid, edge: usize) -> f64 {
    let (a, _) = grid.edge_coords(edge);
    grid.edge_dual_area(edge) / grid.edge_length(a)
}

pub fn face_metric(grid: &StructuredGrid, face: usize) -> f64 {
    let (a, _): (Axis, _) = grid.face_coords(face);
    grid.face_dual_length(face) / grid.face_area(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, h: f64) -> StructuredGrid {
        StructuredGrid::new(n, n, n, h, h, h).unwrap()
    }

    fn whole(g: &StructuredGrid) -> ([f64; 3], [f64; 3]) {
        ([0.0; 3], g.extent())
    }

    #[test]
    fn uniform_copper_conductance() {
        let g = grid(3, 1e-3);
        let (lo, hi) = whole(&g);
        let m = assemble_materials(
            &g,
            &[MaterialRegion::new(lo, hi, KAPPA_COPPER, 1.0, 1.0)],
            Regularization::default(),
            1e-9,
        )
        .unwrap();
        let interior = g.edge(Axis::X, [0, 1, 1]);
        assert!(!g.is_boundary_edge(interior));
        // kappa * h^2 / h = 5.96e7 * 1e-3
        assert!((m.m_kappa[interior] - 5.96e4).abs() < 1e-12 * 5.96e4);
        for e in 0..g.num_edges() {
            let expect = KAPPA_COPPER * edge_metric(&g, e);
            assert!((m.m_kappa[e] - expect).abs() <= 1e-12 * expect);
            assert_eq!(m.m_kappa_hat[e], m.m_kappa[e]);
        }

        // single hexahedron: every edge is a corner edge with a quarter dual area
        let g2 = grid(2, 1e-3);
        let (lo, hi) = whole(&g2);
        let m2 = assemble_materials(
            &g2,
            &[MaterialRegion::new(lo, hi, KAPPA_COPPER, 1.0, 1.0)],
            Regularization::default(),
            1e-9,
        )
        .unwrap();
        assert!(m2.m_kappa.iter().all(|k| (k - 5.96e4 / 4.0).abs() < 1e-12 * 5.96e4));
    }

    #[test]
    fn vacuum_regularization() {
        let g = grid(3, 1e-3);
        let (lo, hi) = whole(&g);
        let m = assemble_materials(
            &g,
            &[MaterialRegion::vacuum(lo, hi)],
            Regularization::Constant { kappa_hat: 1e-2 },
            1e-9,
        )
        .unwrap();
        assert!(m.m_kappa.iter().all(|k| *k == 0.0));
        for e in 0..g.num_edges() {
            let expect = 1e-2 * edge_metric(&g, e);
            assert!((m.m_kappa_hat[e] - expect).abs() <= 1e-14 * expect);
        }
        assert_eq!(classify_edges(&m).num_conductive(), 0);
    }

    #[test]
    fn free_space_reluctance() {
        let g = StructuredGrid::new(3, 4, 3, 1e-3, 2e-3, 1e-3).unwrap();
        let (lo, hi) = whole(&g);
        let m = assemble_materials(&g, &[MaterialRegion::vacuum(lo, hi)], Regularization::default(), 1e-9).unwrap();
        for f in 0..g.num_faces() {
            let expect = face_metric(&g, f) / MU_0;
            assert!((m.m_nu[f] - expect).abs() <= 1e-12 * expect);
        }
        // interior faces of one family share one value
        let interior: Vec<f64> = g
            .face_range(Axis::Z)
            .filter(|&f| !g.is_boundary_face(f))
            .map(|f| m.m_nu[f])
            .collect();
        assert!(interior.windows(2).all(|w| w[0] == w[1]));
        assert!((interior[0] - (1e-3 / (1e-3 * 2e-3)) / MU_0).abs() < 1e-9 * interior[0]);
    }

    #[test]
    fn eps_over_dt_mode() {
        let g = grid(3, 1e-3);
        let (lo, hi) = whole(&g);
        let dt = 2.5e-9;
        let m = assemble_materials(&g, &[MaterialRegion::vacuum(lo, hi)], Regularization::EpsOverDt, dt).unwrap();
        for e in 0..g.num_edges() {
            assert!((m.m_kappa_hat[e] - m.m_eps[e] / dt).abs() <= 1e-14 * m.m_kappa_hat[e]);
        }
    }

    #[test]
    fn uncovered_cell_is_reported() {
        let g = grid(3, 1e-3);
        let err = assemble_materials(
            &g,
            &[MaterialRegion::vacuum([0.0; 3], [1e-3, 2e-3, 2e-3])],
            Regularization::default(),
            1e-9,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("cell 1"), "{msg}");
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let g = grid(3, 1e-3);
        let (lo, hi) = whole(&g);
        let bad = [
            MaterialRegion::new(lo, hi, -1.0, 1.0, 1.0),
            MaterialRegion::new(lo, hi, 0.0, 0.5, 1.0),
            MaterialRegion::new(lo, hi, 0.0, 1.0, 0.0),
            MaterialRegion::vacuum([5.0; 3], [6.0; 3]),
        ];
        for r in bad {
            assert!(assemble_materials(&g, &[r], Regularization::default(), 1e-9).is_err());
        }
        let ok = [MaterialRegion::vacuum(lo, hi)];
        assert!(assemble_materials(&g, &ok, Regularization::Constant { kappa_hat: 0.0 }, 1e-9).is_err());
        assert!(assemble_materials(&g, &ok, Regularization::default(), 0.0).is_err());
    }

    #[test]
    fn later_regions_override() {
        let g = grid(3, 1e-3);
        let (lo, hi) = whole(&g);
        let regions = [
            MaterialRegion::new(lo, hi, 1.0, 1.0, 1.0),
            MaterialRegion::new(lo, hi, 2.0, 1.0, 1.0),
        ];
        let cells = paint_cells(&g, &regions).unwrap();
        assert!(cells.kappa.iter().all(|k| *k == 2.0));
    }

    #[test]
    fn copper_bar_classification_matches_adjacency_scan() {
        let g = grid(5, 1e-3);
        let (lo, hi) = whole(&g);
        let regions = [
            MaterialRegion::vacuum(lo, hi),
            MaterialRegion::new([0.0, 1e-3, 1e-3], [4e-3, 2e-3, 2e-3], KAPPA_COPPER, 1.0, 1.0),
        ];
        let m = assemble_materials(&g, &regions, Regularization::default(), 1e-9).unwrap();
        let cells = paint_cells(&g, &regions).unwrap();
        // brute force: an edge is conductive iff one of its cells is copper
        let mut brute = 0;
        for e in 0..g.num_edges() {
            let (a, p) = g.edge_coords(e);
            let mut touches = false;
            for c in 0..g.num_cells() {
                let q = g.cell_coords(c);
                let adjacent = (0..3).all(|d| {
                    if d == a.index() {
                        q[d] == p[d]
                    } else {
                        q[d] == p[d] || q[d] + 1 == p[d]
                    }
                });
                touches |= adjacent && cells.kappa[c] > 0.0;
            }
            brute += usize::from(touches);
        }
        let classes = classify_edges(&m);
        assert_eq!(classes.num_conductive(), brute);
        assert!(brute > 0 && classes.num_non_conductive() > 0);
    }
}
