//! TOML scenario files.
//!
//! ```toml
//! [grid]
//! nodes = [11, 11, 9]
//! spacing = [1e-4, 1e-4, 1e-4]
//!
//! [[regions]]
//! name = "copper"
//! min = [2e-4, 2e-4, 0.0]
//! max = [3e-4, 3e-4, 5e-4]
//! kappa = 5.96e7
//!
//! [electrodes]
//! excited = [{ min = [0, 0, 8], max = [10, 10, 8] }]
//! ground_remaining_boundary = true
//!
//! [excitation]
//! phi_max = 12.0
//! frequency = 1e7
//!
//! [time]
//! dt = 2.5e-9
//! n_end = 481
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eqs::Electrodes;
use crate::error::{Error, Result};
use crate::grid::StructuredGrid;
use crate::linalg::SolverSettings;
use crate::materials::{MaterialRegion, Regularization, DEFAULT_KAPPA_HAT};
use crate::orchestrator::{Excitation, Mode, Scenario, Scheme};

/// Upper bound on grid nodes accepted from a file, checked before allocation.
pub const MAX_NODES: usize = 20_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub grid: GridSection,
    /// Later regions override earlier ones; cells outside every region are vacuum.
    #[serde(default)]
    pub regions: Vec<MaterialRegion>,
    pub electrodes: ElectrodeSection,
    pub excitation: Excitation,
    pub time: TimeSection,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub regularization: RegularizationSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Nodes per axis.
    pub nodes: [usize; 3],
    /// Metres.
    pub spacing: [f64; 3],
}

/// Inclusive box of node indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeBox {
    pub min: [usize; 3],
    pub max: [usize; 3],
}

impl NodeBox {
    fn nodes(&self, grid: &StructuredGrid, field: &str) -> Result<Vec<usize>> {
        let n = grid.nodes_per_axis();
        for d in 0..3 {
            if self.min[d] > self.max[d] || self.max[d] >= n[d] {
                return Err(Error::Config(format!(
                    "{field}: node box {:?}..={:?} is empty or exceeds the grid {:?}",
                    self.min, self.max, n
                )));
            }
        }
        let mut out = Vec::new();
        for k in self.min[2]..=self.max[2] {
            for j in self.min[1]..=self.max[1] {
                for i in self.min[0]..=self.max[0] {
                    out.push(grid.node([i, j, k]));
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectrodeSection {
    pub excited: Vec<NodeBox>,
    #[serde(default)]
    pub grounded: Vec<NodeBox>,
    /// Ground every boundary node not listed in `excited` or `grounded`.
    #[serde(default)]
    pub ground_remaining_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    /// Seconds.
    pub dt: f64,
    /// Time levels including the initial one.
    pub n_end: usize,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegularizationMode {
    #[default]
    Constant,
    EpsOverDt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizationSection {
    #[serde(default)]
    pub mode: RegularizationMode,
    /// S/m, used by the `constant` mode.
    #[serde(default = "default_kappa_hat")]
    pub kappa_hat: f64,
    /// Use the regularized conductance in the potential equation.
    #[serde(default = "yes")]
    pub stabilized: bool,
}

impl Default for RegularizationSection {
    fn default() -> Self {
        Self {
            mode: RegularizationMode::Constant,
            kappa_hat: DEFAULT_KAPPA_HAT,
            stabilized: true,
        }
    }
}

impl RegularizationSection {
    fn resolve(&self) -> Regularization {
        match self.mode {
            RegularizationMode::Constant => Regularization::Constant {
                kappa_hat: self.kappa_hat,
            },
            RegularizationMode::EpsOverDt => Regularization::EpsOverDt,
        }
    }
}

fn default_kappa_hat() -> f64 {
    DEFAULT_KAPPA_HAT
}

fn yes() -> bool {
    true
}

/// How much field data a run writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DumpFields {
    None,
    /// Snapshots at the requested sample times and the final level.
    #[default]
    Summary,
    /// Every level.
    All,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub dump_fields: DumpFields,
    /// Seconds; snapshots are taken at the nearest time level.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sample_times: Vec<f64>,
}

impl ScenarioFile {
    /// Parses TOML text; `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize scenario: {e}")))
    }

    fn check_grid(&self) -> Result<()> {
        let g = &self.grid;
        if g.nodes.iter().any(|n| *n < 2) {
            return Err(Error::Config(format!("grid.nodes = {:?}: need at least 2 per axis", g.nodes)));
        }
        let total = g.nodes.iter().try_fold(1usize, |acc, n| acc.checked_mul(*n));
        if total.is_none_or(|t| t > MAX_NODES) {
            return Err(Error::Config(format!(
                "grid.nodes = {:?} exceeds the limit of {MAX_NODES} nodes",
                g.nodes
            )));
        }
        if g.spacing.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::Config(format!("grid.spacing = {:?} must be positive", g.spacing)));
        }
        Ok(())
    }

    /// Builds the solver scenario, validating everything.
    pub fn build(&self) -> Result<Scenario> {
        self.check_grid()?;
        let [nx, ny, nz] = self.grid.nodes;
        let [dx, dy, dz] = self.grid.spacing;
        let grid = StructuredGrid::new(nx, ny, nz, dx, dy, dz)?;
        let mut regions = vec![MaterialRegion::vacuum([0.0; 3], grid.extent())];
        regions.extend(self.regions.iter().cloned());
        let collect = |boxes: &[NodeBox], field: &str| -> Result<Vec<usize>> {
            let mut out = Vec::new();
            for (i, b) in boxes.iter().enumerate() {
                out.extend(b.nodes(&grid, &format!("electrodes.{field}[{i}]"))?);
            }
            out.sort_unstable();
            out.dedup();
            Ok(out)
        };
        let excited = collect(&self.electrodes.excited, "excited")?;
        if excited.is_empty() {
            return Err(Error::Config("electrodes.excited: at least one node box is required".into()));
        }
        let mut grounded = collect(&self.electrodes.grounded, "grounded")?;
        if self.electrodes.ground_remaining_boundary {
            let listed: std::collections::HashSet<usize> = excited.iter().chain(&grounded).copied().collect();
            grounded.extend((0..grid.num_nodes()).filter(|&i| {
                grid.is_boundary_node(grid.node_coords(i)) && !listed.contains(&i)
            }));
            grounded.sort_unstable();
        }
        let electrodes = Electrodes::new(&grid, &excited, &grounded)?;
        let scenario = Scenario {
            grid,
            regions,
            electrodes,
            excitation: self.excitation,
            dt: self.time.dt,
            n_end: self.time.n_end,
            scheme: self.time.scheme,
            mode: self.time.mode,
            regularization: self.regularization.resolve(),
            stabilized: self.regularization.stabilized,
            solver: self.solver,
            source: None,
        };
        scenario.validate()?;
        scenario.materials()?;
        Ok(scenario)
    }
}
