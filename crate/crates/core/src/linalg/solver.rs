use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::dense::DenseMatrix;
use super::direct::{SparseCholesky, SparseLu};
use super::krylov::{jacobi_inverse, preconditioned_cg, true_residual};
use super::{CsrMatrix, Scalar};

/// Largest system size accepted by the dense path.
pub const DENSE_LIMIT: usize = 5000;

/// Outcome of one linear solve. The residual is recomputed from the returned
/// solution, not taken from the solver's internal recurrence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    /// Seconds.
    pub wall_time: f64,
    pub method: &'static str,
}

/// Linear solver family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Jacobi-preconditioned CG (COCG for complex systems).
    #[default]
    Cg,
    /// Sparse direct factorization, computed once per system.
    Direct,
    /// Dense factorization for small systems.
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    #[serde(default)]
    pub kind: SolverKind,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Defaults to ten times the system size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

fn default_tol() -> f64 {
    1e-10
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            kind: SolverKind::Cg,
            tol: default_tol(),
            max_iter: None,
        }
    }
}

impl SolverSettings {
    pub fn direct() -> Self {
        Self {
            kind: SolverKind::Direct,
            ..Self::default()
        }
    }

    pub fn cg(tol: f64) -> Self {
        Self {
            kind: SolverKind::Cg,
            tol,
            max_iter: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!("solver tolerance {} must lie in (0, 1)", self.tol)));
        }
        Ok(())
    }
}

/// Scalars with a sparse direct factorization.
pub trait Factorizable: Scalar {
    type Factor: std::fmt::Debug + Send + Sync;
    fn factor(a: &CsrMatrix<Self>) -> Result<Self::Factor>;
    fn apply_factor(f: &Self::Factor, b: &[Self]) -> Vec<Self>;
    const KRYLOV_NAME: &'static str;
    const DIRECT_NAME: &'static str;
}

impl Factorizable for f64 {
    type Factor = SparseCholesky;
    fn factor(a: &CsrMatrix<f64>) -> Result<SparseCholesky> {
        SparseCholesky::factor(a)
    }
    fn apply_factor(f: &SparseCholesky, b: &[f64]) -> Vec<f64> {
        f.solve(b)
    }
    const KRYLOV_NAME: &'static str = "pcg-jacobi";
    const DIRECT_NAME: &'static str = "sparse-cholesky";
}

impl Factorizable for Complex64 {
    type Factor = SparseLu;
    fn factor(a: &CsrMatrix<Complex64>) -> Result<SparseLu> {
        SparseLu::factor(a)
    }
    fn apply_factor(f: &SparseLu, b: &[Complex64]) -> Vec<Complex64> {
        f.solve(b)
    }
    const KRYLOV_NAME: &'static str = "cocg-jacobi";
    const DIRECT_NAME: &'static str = "sparse-lu";
}

#[derive(Debug)]
enum Backend<T: Factorizable> {
    Krylov { diag_inv: Vec<T>, max_iter: usize },
    Direct(T::Factor),
    Dense(DenseMatrix<T>),
}

/// A system matrix with its solver set up (preconditioner or factorization)
/// so that repeated right-hand sides are cheap.
#[derive(Debug)]
pub struct PreparedSolver<T: Factorizable> {
    matrix: CsrMatrix<T>,
    tol: f64,
    backend: Backend<T>,
}

impl<T: Factorizable> PreparedSolver<T> {
    pub fn new(matrix: CsrMatrix<T>, settings: &SolverSettings) -> Result<Self> {
        settings.validate()?;
        let n = matrix.nrows();
        let backend = match settings.kind {
            SolverKind::Cg => Backend::Krylov {
                diag_inv: jacobi_inverse(&matrix)?,
                max_iter: settings.max_iter.unwrap_or(10 * n.max(1)),
            },
            SolverKind::Direct => Backend::Direct(T::factor(&matrix)?),
            SolverKind::Dense => {
                if n > DENSE_LIMIT {
                    return Err(Error::Config(format!(
                        "dense solver limited to {DENSE_LIMIT} unknowns, system has {n}"
                    )));
                }
                Backend::Dense(matrix.to_dense())
            }
        };
        Ok(Self {
            matrix,
            tol: settings.tol,
            backend,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.matrix
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// Solves `A x = b`; `guess` seeds the iterative path and is ignored otherwise.
    pub fn solve(&self, b: &[T], guess: Option<&[T]>) -> Result<(Vec<T>, SolveReport)> {
        if b.len() != self.size() {
            return Err(Error::Dimension {
                expected: self.size(),
                got: b.len(),
                context: "prepared solve",
            });
        }
        if b.iter().any(|v| !v.finite()) {
            return Err(Error::NonFinite("right-hand side"));
        }
        match &self.backend {
            Backend::Krylov { diag_inv, max_iter } => {
                preconditioned_cg(&self.matrix, b, guess, diag_inv, self.tol, *max_iter, T::KRYLOV_NAME)
            }
            Backend::Direct(f) => self.finish_direct(b, |rhs| Ok(T::apply_factor(f, rhs)), T::DIRECT_NAME),
            Backend::Dense(d) => self.finish_direct(b, |rhs| d.lu_solve(rhs), "dense-lu"),
        }
    }

    /// Direct solve with up to two steps of iterative refinement when the
    /// recomputed residual misses the tolerance.
    fn finish_direct(
        &self,
        b: &[T],
        apply: impl Fn(&[T]) -> Result<Vec<T>>,
        method: &'static str,
    ) -> Result<(Vec<T>, SolveReport)> {
        let start = Instant::now();
        let mut x = apply(b)?;
        let mut residual = true_residual(&self.matrix, b, &x)?;
        let mut refinements = 0;
        while residual > self.tol && refinements < 2 && residual.is_finite() {
            let ax = self.matrix.spmv(&x)?;
            let r: Vec<T> = b.iter().zip(&ax).map(|(u, v)| *u - *v).collect();
            let dx = apply(&r)?;
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += *di;
            }
            residual = true_residual(&self.matrix, b, &x)?;
            refinements += 1;
        }
        if !residual.is_finite() {
            return Err(Error::NonFinite(method));
        }
        if residual > self.tol {
            return Err(Error::NotConverged {
                method,
                iterations: refinements,
                residual,
                history: vec![residual],
            });
        }
        Ok((
            x,
            SolveReport {
                iterations: refinements,
                relative_residual: residual,
                wall_time: start.elapsed().as_secs_f64(),
                method,
            },
        ))
    }
}
