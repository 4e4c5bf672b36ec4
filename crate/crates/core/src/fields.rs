//! Field recovery from potentials and the weighted relative-difference metric.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_curl, build_gradient, IncidenceMatrix, StructuredGrid};
use crate::orchestrator::{History, Scheme};

/// Edge-sampled electric field and face-sampled magnetic flux at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub t: f64,
    /// V/m along each edge.
    pub e_total: Vec<f64>,
    pub e_irr: Vec<f64>,
    pub e_rem: Vec<f64>,
    /// Wb through each face.
    pub b: Vec<f64>,
}

/// Grid entity family a field vector lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Entity {
    Edge,
    Face,
}

/// Operators needed to turn potentials into fields.
#[derive(Debug, Clone)]
pub struct FieldRecovery {
    gradient: IncidenceMatrix,
    curl: IncidenceMatrix,
    edge_len: Vec<f64>,
}

impl FieldRecovery {
    pub fn new(grid: &StructuredGrid) -> Self {
        Self {
            gradient: build_gradient(grid),
            curl: build_curl(grid),
            edge_len: (0..grid.num_edges())
                .map(|e| grid.edge_length(grid.edge_coords(e).0))
                .collect(),
        }
    }

    fn assemble(&self, t: f64, e_irr: Vec<f64>, e_rem: Vec<f64>, b: Vec<f64>) -> FieldSnapshot {
        let e_total = e_irr.iter().zip(&e_rem).map(|(x, y)| x + y).collect();
        FieldSnapshot {
            t,
            e_total,
            e_irr,
            e_rem,
            b,
        }
    }

    /// Fields at `tⁿ⁺¹`: `E_irr = −Gφⁿ⁺¹`, `E_rem = −(aⁿ⁺¹ − aⁿ)/Δt`, `B = C aⁿ⁺¹`.
    pub fn recover(&self, a_np1: &[f64], a_n: &[f64], phi_np1: &[f64], dt: f64, t: f64) -> FieldSnapshot {
        let gphi = self.gradient.apply(phi_np1);
        let e_irr = gphi.iter().zip(&self.edge_len).map(|(g, l)| -g / l).collect();
        let e_rem = (0..a_n.len())
            .map(|e| -(a_np1[e] - a_n[e]) / (dt * self.edge_len[e]))
            .collect();
        self.assemble(t, e_irr, e_rem, self.curl.apply(a_np1))
    }

    /// Fields at the interval midpoint `tⁿ⁺½`, where the trapezoidal rule is
    /// second-order accurate: potentials and `a` are averaged over the step.
    pub fn recover_midpoint(
        &self,
        a_np1: &[f64],
        a_n: &[f64],
        phi_np1: &[f64],
        phi_n: &[f64],
        dt: f64,
        t_mid: f64,
    ) -> FieldSnapshot {
        let phi: Vec<f64> = phi_np1.iter().zip(phi_n).map(|(x, y)| 0.5 * (x + y)).collect();
        let a: Vec<f64> = a_np1.iter().zip(a_n).map(|(x, y)| 0.5 * (x + y)).collect();
        let e_irr = self
            .gradient
            .apply(&phi)
            .iter()
            .zip(&self.edge_len)
            .map(|(g, l)| -g / l)
            .collect();
        let e_rem = (0..a_n.len())
            .map(|e| -(a_np1[e] - a_n[e]) / (dt * self.edge_len[e]))
            .collect();
        self.assemble(t_mid, e_irr, e_rem, self.curl.apply(&a))
    }

    /// Fields at `tⁿ` from centered differences: `E_rem = −(aⁿ⁺¹ − aⁿ⁻¹)/(2Δt)`.
    pub fn recover_centered(
        &self,
        a_np1: &[f64],
        a_n: &[f64],
        a_nm1: &[f64],
        phi_n: &[f64],
        dt: f64,
        t: f64,
    ) -> FieldSnapshot {
        let e_irr = self
            .gradient
            .apply(phi_n)
            .iter()
            .zip(&self.edge_len)
            .map(|(g, l)| -g / l)
            .collect();
        let e_rem = (0..a_n.len())
            .map(|e| -(a_np1[e] - a_nm1[e]) / (2.0 * dt * self.edge_len[e]))
            .collect();
        self.assemble(t, e_irr, e_rem, self.curl.apply(a_n))
    }

    /// Snapshot exactly at `tⁿ`. Implicit Euler uses the backward difference.
    /// The trapezoidal rule uses the centred difference when level `n + 1` is
    /// retained and the one-sided three-point difference
    /// `(3aⁿ − 4aⁿ⁻¹ + aⁿ⁻²)/(2Δt)` otherwise, so the final level of a run is
    /// also second order.
    pub fn at_level(&self, history: &History, n: usize) -> Result<FieldSnapshot> {
        let missing = |k: usize| Error::Config(format!("level {k} was not retained by the run"));
        if n == 0 {
            return Err(Error::Config("fields need a completed step (n >= 1)".into()));
        }
        let cur = history.state(n).ok_or_else(|| missing(n))?;
        let prev = history.state(n - 1).ok_or_else(|| missing(n - 1))?;
        if history.scheme == Scheme::Euler {
            return Ok(self.recover(&cur.a, &prev.a, &cur.phi, history.dt, cur.t));
        }
        if let Some(next) = history.state(n + 1) {
            return Ok(self.recover_centered(&next.a, &cur.a, &prev.a, &cur.phi, history.dt, cur.t));
        }
        match n.checked_sub(2).and_then(|k| history.state(k)) {
            Some(prev2) => {
                let mut snap = self.recover(&cur.a, &prev.a, &cur.phi, history.dt, cur.t);
                for e in 0..cur.a.len() {
                    snap.e_rem[e] = -(3.0 * cur.a[e] - 4.0 * prev.a[e] + prev2.a[e]) / (2.0 * history.dt * self.edge_len[e]);
                    snap.e_total[e] = snap.e_irr[e] + snap.e_rem[e];
                }
                Ok(snap)
            }
            None => Ok(self.recover(&cur.a, &prev.a, &cur.phi, history.dt, cur.t)),
        }
    }

    /// Snapshot of level `n` of a run with the scheme-consistent recovery:
    /// at `tⁿ` for implicit Euler, at `tⁿ⁻½` for the trapezoidal rule.
    pub fn from_history(&self, history: &History, n: usize) -> Result<FieldSnapshot> {
        let missing = |k: usize| Error::Config(format!("level {k} was not retained by the run"));
        if n == 0 {
            return Err(Error::Config("fields need a completed step (n >= 1)".into()));
        }
        let cur = history.state(n).ok_or_else(|| missing(n))?;
        let prev = history.state(n - 1).ok_or_else(|| missing(n - 1))?;
        Ok(match history.scheme {
            Scheme::Euler => self.recover(&cur.a, &prev.a, &cur.phi, history.dt, cur.t),
            Scheme::Trapezoidal => self.recover_midpoint(
                &cur.a,
                &prev.a,
                &cur.phi,
                &prev.phi,
                history.dt,
                0.5 * (cur.t + prev.t),
            ),
        })
    }
}

/// One-shot form of [`FieldRecovery::recover`].
pub fn recover_fields(
    grid: &StructuredGrid,
    a_np1: &[f64],
    a_n: &[f64],
    phi_np1: &[f64],
    dt: f64,
    t: f64,
) -> FieldSnapshot {
    FieldRecovery::new(grid).recover(a_np1, a_n, phi_np1, dt, t)
}

/// L² weights for point-field values: edge fields in V/m get the edge's dual
/// volume; face fluxes in Wb get `dual length / face area`.
pub fn entity_weights(grid: &StructuredGrid, entity: Entity) -> Vec<f64> {
    match entity {
        Entity::Edge => (0..grid.num_edges()).map(|e| grid.edge_dual_volume(e)).collect(),
        Entity::Face => (0..grid.num_faces())
            .map(|f| grid.face_dual_length(f) / grid.face_area(grid.face_coords(f).0))
            .collect(),
    }
}

/// Both readings of the relative-difference denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelativeDifference {
    /// `‖Re(F_M) − F_D‖ / ‖F_M‖` with the complex magnitude in the denominator.
    pub value: f64,
    /// Same numerator over `‖Re(F_M)‖`.
    pub real_denominator: f64,
}

/// Weighted relative difference between a complex reference and a real test field.
pub fn relative_difference_weighted(
    weights: &[f64],
    reference: &[Complex64],
    test: &[f64],
) -> Result<RelativeDifference> {
    if reference.len() != weights.len() || test.len() != weights.len() {
        return Err(Error::Dimension {
            expected: weights.len(),
            got: if reference.len() != weights.len() { reference.len() } else { test.len() },
            context: "relative difference",
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut den_re = 0.0;
    for ((w, r), x) in weights.iter().zip(reference).zip(test) {
        num += w * (r.re - x).powi(2);
        den += w * r.norm_sqr();
        den_re += w * r.re * r.re;
    }
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    let num = num.sqrt();
    Ok(RelativeDifference {
        value: num / den.sqrt(),
        real_denominator: if den_re == 0.0 { f64::INFINITY } else { num / den_re.sqrt() },
    })
}

/// Relative difference on the grid's `entity` family.
pub fn relative_difference(
    grid: &StructuredGrid,
    entity: Entity,
    reference: &[Complex64],
    test: &[f64],
) -> Result<RelativeDifference> {
    relative_difference_weighted(&entity_weights(grid, entity), reference, test)
}

/// Real-reference convenience form.
pub fn relative_difference_real(grid: &StructuredGrid, entity: Entity, reference: &[f64], test: &[f64]) -> Result<f64> {
    let r: Vec<Complex64> = reference.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    Ok(relative_difference(grid, entity, &r, test)?.value)
}
