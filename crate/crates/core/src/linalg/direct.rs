//! Sparse direct factorizations backed by `faer` (fill-reducing ordering,
//! supernodal Cholesky for SPD systems, partial-pivoting LU otherwise).

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Par, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

use super::CsrMatrix;

fn to_faer<T: super::Scalar + faer::traits::ComplexField>(a: &CsrMatrix<T>) -> Result<SparseColMat<usize, T>> {
    let triplets: Vec<Triplet<usize, usize, T>> = a.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
    SparseColMat::try_new_from_triplets(a.nrows(), a.ncols(), &triplets)
        .map_err(|e| Error::Factorization(format!("sparse matrix conversion: {e:?}")))
}

fn sequential() {
    // single-threaded kernels keep results bitwise reproducible
    faer::set_global_parallelism(Par::Seq);
}

/// Cholesky factorization `A = L Lᵀ` of a sparse SPD matrix.
pub struct SparseCholesky {
    n: usize,
    llt: Llt<usize, f64>,
}

impl SparseCholesky {
    pub fn factor(a: &CsrMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension {
                expected: a.nrows(),
                got: a.ncols(),
                context: "Cholesky of non-square matrix",
            });
        }
        sequential();
        let llt = to_faer(a)?
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Factorization(format!("sparse Cholesky: {e:?}")))?;
        Ok(Self { n: a.nrows(), llt })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.llt.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }
}

/// LU factorization with partial pivoting of a sparse complex matrix.
pub struct SparseLu {
    n: usize,
    lu: Lu<usize, Complex64>,
}

impl SparseLu {
    pub fn factor(a: &CsrMatrix<Complex64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension {
                expected: a.nrows(),
                got: a.ncols(),
                context: "LU of non-square matrix",
            });
        }
        sequential();
        let lu = to_faer(a)?
            .sp_lu()
            .map_err(|e| Error::Factorization(format!("sparse LU: {e:?}")))?;
        Ok(Self { n: a.nrows(), lu })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(b.len(), self.n);
        let mut rhs = Mat::<Complex64>::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }
}

impl std::fmt::Debug for SparseCholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseCholesky").field("n", &self.n).finish()
    }
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_tridiagonal() {
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, t);
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a.spmv(&x_true).unwrap();
        let x = SparseCholesky::factor(&a).unwrap().solve(&b);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(SparseCholesky::factor(&a).is_err());
    }

    #[test]
    fn lu_complex_diagonal() {
        let a = CsrMatrix::from_triplets(
            2,
            2,
            vec![(0, 0, Complex64::new(1.0, 1.0)), (1, 1, Complex64::new(2.0, 0.0))],
        );
        let x = SparseLu::factor(&a).unwrap().solve(&[Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)]);
        assert!((x[0] - Complex64::new(0.5, -0.5)).norm() < 1e-15);
        assert!((x[1] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }
}
