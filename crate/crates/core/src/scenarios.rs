//! Parameterized desk-scale scenarios: a single-turn conductor loop between
//! electrode plates, a parallel-plate capacitor and a resistive bar.

use crate::eqs::Electrodes;
use crate::error::{Error, Result};
use crate::grid::StructuredGrid;
use crate::linalg::SolverSettings;
use crate::io::config::{ElectrodeSection, GridSection, NodeBox, ScenarioFile, TimeSection};
use crate::materials::{MaterialRegion, Regularization, KAPPA_COPPER};
use crate::orchestrator::{Excitation, Mode, Scenario, Scheme};

/// Common time-stepping settings for the builders.
#[derive(Debug, Clone, Copy)]
pub struct Timing {
    pub dt: f64,
    pub n_end: usize,
    pub scheme: Scheme,
    pub mode: Mode,
    pub solver: SolverSettings,
}

impl Default for Timing {
    fn default() -> Self {
        Self {
            dt: 2.5e-9,
            n_end: 481,
            scheme: Scheme::Trapezoidal,
            mode: Mode::TwoLoop,
            solver: SolverSettings::direct(),
        }
    }
}

/// Rectangular single-turn loop. A post rises from the grounded bottom plate,
/// the loop runs around the domain at mid height and a second post beside the
/// gap connects to the excited top plate. Every other boundary node is grounded.
#[derive(Debug, Clone, Copy)]
pub struct LoopCoil {
    /// Cells per axis.
    pub cells: [usize; 3],
    /// Cell size, m.
    pub h: f64,
    /// Conductor conductivity, S/m.
    pub kappa: f64,
    /// Distance in cells between the loop and the side walls.
    pub margin: usize,
    pub excitation: Excitation,
}

impl Default for LoopCoil {
    fn default() -> Self {
        Self {
            cells: [10, 10, 8],
            h: 1e-4,
            kappa: KAPPA_COPPER,
            margin: 2,
            excitation: Excitation::ramped(12.0, 1e7),
        }
    }
}

impl LoopCoil {
    /// Conductor boxes in cell units.
    fn boxes(&self) -> Result<Vec<([usize; 3], [usize; 3])>> {
        let [nx, ny, nz] = self.cells;
        let m = self.margin;
        if nx < 2 * m + 4 || ny < 2 * m + 3 || nz < 3 {
            return Err(Error::Config(format!(
                "loop coil needs at least {}x{}x3 cells for margin {m}, got {nx}x{ny}x{nz}",
                2 * m + 4,
                2 * m + 3
            )));
        }
        let k = nz / 2;
        Ok(vec![
            // post from the bottom plate
            ([m, m, 0], [m + 1, m + 1, k + 1]),
            // left, far and right sides of the loop
            ([m, m, k], [m + 1, ny - m, k + 1]),
            ([m, ny - m - 1, k], [nx - m, ny - m, k + 1]),
            ([nx - m - 1, m, k], [nx - m, ny - m, k + 1]),
            // near side, leaving a one-cell gap
            ([m + 2, m, k], [nx - m, m + 1, k + 1]),
            // post to the top plate
            ([m + 2, m, k], [m + 3, m + 1, nz]),
        ])
    }

    pub fn build(&self, timing: Timing) -> Result<Scenario> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::Config(format!("cell size {} must be positive", self.h)));
        }
        let [nx, ny, nz] = self.cells;
        let grid = StructuredGrid::new(nx + 1, ny + 1, nz + 1, self.h, self.h, self.h)?;
        let h = self.h;
        let mut regions = vec![MaterialRegion::vacuum([0.0; 3], grid.extent()).named("air")];
        for (lo, hi) in self.boxes()? {
            let at = |p: [usize; 3]| [p[0] as f64 * h, p[1] as f64 * h, p[2] as f64 * h];
            regions.push(MaterialRegion::new(at(lo), at(hi), self.kappa, 1.0, 1.0).named("conductor"));
        }
        let top: Vec<usize> = (0..grid.num_nodes())
            .filter(|&i| grid.node_coords(i)[2] == nz)
            .collect();
        let electrodes = Electrodes::with_grounded_rest(&grid, &top)?;
        Ok(assemble(grid, regions, electrodes, self.excitation, timing))
    }

    /// Equivalent scenario file; builds to the same grid, regions and electrodes.
    pub fn to_file(&self, timing: Timing) -> Result<ScenarioFile> {
        let sc = self.build(timing)?;
        let [nx, ny, nz] = self.cells;
        Ok(file_from(
            &sc,
            sc.regions[1..].to_vec(),
            ElectrodeSection {
                excited: vec![NodeBox {
                    min: [0, 0, nz],
                    max: [nx, ny, nz],
                }],
                grounded: Vec::new(),
                ground_remaining_boundary: true,
            },
        ))
    }
}

/// Plates at `z = 0` (grounded) and `z = gap` (excited) filling the whole
/// cross section; the side walls carry no Dirichlet data.
#[derive(Debug, Clone, Copy)]
pub struct PlateStack {
    pub cross_cells: [usize; 2],
    pub gap_cells: usize,
    pub h: f64,
    pub kappa: f64,
    pub eps_r: f64,
    pub excitation: Excitation,
}

impl PlateStack {
    /// Vacuum capacitor, 4 cells of 1 mm between the plates.
    pub fn capacitor() -> Self {
        Self {
            cross_cells: [3, 3],
            gap_cells: 4,
            h: 1e-3,
            kappa: 0.0,
            eps_r: 1.0,
            excitation: Excitation::constant(12.0),
        }
    }

    /// Copper bar between two end plates.
    pub fn resistive_bar() -> Self {
        Self {
            cross_cells: [2, 2],
            gap_cells: 8,
            h: 1e-3,
            kappa: KAPPA_COPPER,
            eps_r: 1.0,
            excitation: Excitation::constant(1.0),
        }
    }

    pub fn gap(&self) -> f64 {
        self.gap_cells as f64 * self.h
    }

    pub fn build(&self, timing: Timing) -> Result<Scenario> {
        let [nx, ny] = self.cross_cells;
        let nz = self.gap_cells;
        let grid = StructuredGrid::new(nx + 1, ny + 1, nz + 1, self.h, self.h, self.h)?;
        let regions = vec![MaterialRegion::new([0.0; 3], grid.extent(), self.kappa, self.eps_r, 1.0).named("fill")];
        let layer = |k: usize| -> Vec<usize> {
            (0..grid.num_nodes()).filter(|&i| grid.node_coords(i)[2] == k).collect()
        };
        let electrodes = Electrodes::new(&grid, &layer(nz), &layer(0))?;
        Ok(assemble(grid, regions, electrodes, self.excitation, timing))
    }

    pub fn to_file(&self, timing: Timing) -> Result<ScenarioFile> {
        let sc = self.build(timing)?;
        let [nx, ny] = self.cross_cells;
        let nz = self.gap_cells;
        Ok(file_from(
            &sc,
            sc.regions.clone(),
            ElectrodeSection {
                excited: vec![NodeBox {
                    min: [0, 0, nz],
                    max: [nx, ny, nz],
                }],
                grounded: vec![NodeBox {
                    min: [0, 0, 0],
                    max: [nx, ny, 0],
                }],
                ground_remaining_boundary: false,
            },
        ))
    }
}

fn file_from(sc: &Scenario, regions: Vec<MaterialRegion>, electrodes: ElectrodeSection) -> ScenarioFile {
    ScenarioFile {
        grid: GridSection {
            nodes: sc.grid.nodes_per_axis(),
            spacing: sc.grid.spacing(),
        },
        regions,
        electrodes,
        excitation: sc.excitation,
        time: TimeSection {
            dt: sc.dt,
            n_end: sc.n_end,
            scheme: sc.scheme,
            mode: sc.mode,
        },
        solver: sc.solver,
        regularization: Default::default(),
        output: Default::default(),
    }
}

fn assemble(
    grid: StructuredGrid,
    regions: Vec<MaterialRegion>,
    electrodes: Electrodes,
    excitation: Excitation,
    timing: Timing,
) -> Scenario {
    Scenario {
        grid,
        regions,
        electrodes,
        excitation,
        dt: timing.dt,
        n_end: timing.n_end,
        scheme: timing.scheme,
        mode: timing.mode,
        regularization: Regularization::default(),
        stabilized: true,
        solver: timing.solver,
        source: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::classify_edges;

    #[test]
    fn loop_has_a_gap_and_a_closed_path() {
        let sc = LoopCoil::default().build(Timing::default()).unwrap();
        let m = sc.materials().unwrap();
        let g = &sc.grid;
        // conducting edges form a path from the bottom to the top plate
        let conducting: Vec<bool> = m.m_kappa.iter().map(|k| *k > 1.0).collect();
        let mut reach = vec![false; g.num_nodes()];
        let mut stack: Vec<usize> = (0..g.num_nodes()).filter(|&i| g.node_coords(i)[2] == 0).collect();
        for &i in &stack {
            reach[i] = true;
        }
        let grad = crate::grid::build_gradient(g);
        let mut adj = vec![Vec::new(); g.num_nodes()];
        for e in 0..g.num_edges() {
            if conducting[e] {
                let ends: Vec<usize> = grad.row(e).map(|(n, _)| n).collect();
                adj[ends[0]].push(ends[1]);
                adj[ends[1]].push(ends[0]);
            }
        }
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !reach[j] {
                    reach[j] = true;
                    stack.push(j);
                }
            }
        }
        assert!((0..g.num_nodes()).any(|i| reach[i] && g.node_coords(i)[2] == 8));
        // the gap: no conducting x-edge between cell columns m+1 and m+2 at y = m
        let lp = LoopCoil::default();
        let k = lp.cells[2] / 2;
        let e = g.edge(crate::grid::Axis::X, [lp.margin + 1, lp.margin, k]);
        assert!(!conducting[e]);
        assert!(classify_edges(&m).conductive.iter().any(|c| *c));
    }

    #[test]
    fn scenario_files_build_the_same_problem() {
        let t = Timing::default();
        let lp = LoopCoil::default();
        let direct = lp.build(t).unwrap();
        let text = lp.to_file(t).unwrap().to_toml().unwrap();
        let parsed = ScenarioFile::parse(&text, "loop").unwrap().build().unwrap();
        assert_eq!(parsed.electrodes, direct.electrodes);
        assert_eq!(parsed.materials().unwrap(), direct.materials().unwrap());
        let bar = PlateStack::resistive_bar();
        let parsed = ScenarioFile::parse(&bar.to_file(t).unwrap().to_toml().unwrap(), "bar").unwrap();
        assert_eq!(parsed.build().unwrap().electrodes, bar.build(t).unwrap().electrodes);
    }

    #[test]
    fn too_small_loop_is_rejected() {
        let lp = LoopCoil {
            cells: [5, 5, 4],
            ..LoopCoil::default()
        };
        assert!(lp.build(Timing::default()).is_err());
    }

    #[test]
    fn plate_electrodes_cover_end_layers() {
        let sc = PlateStack::capacitor().build(Timing::default()).unwrap();
        assert_eq!(sc.electrodes.num_excited(), 16);
        assert_eq!(sc.electrodes.num_grounded(), 16);
        assert!(!sc.electrodes.covers_boundary(&sc.grid));
        assert_eq!(PlateStack::capacitor().gap(), 4e-3);
    }
}
