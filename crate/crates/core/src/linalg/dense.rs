//! Small dense matrices and direct factorizations, used as oracles for the
//! sparse paths and as a solver for desk-scale systems.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

use super::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    nrows: usize,
    ncols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![T::zero(); nrows * ncols],
        }
    }

    pub fn from_fn(nrows: usize, ncols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(nrows, ncols);
        for r in 0..nrows {
            for c in 0..ncols {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                let row = &self.data[r * self.ncols..(r + 1) * self.ncols];
                row.iter().zip(x).fold(T::zero(), |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }

    pub fn matmul(&self, rhs: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(self.ncols, rhs.nrows);
        let mut out = DenseMatrix::zeros(self.nrows, rhs.ncols);
        for r in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(r, k)];
                if a == T::zero() {
                    continue;
                }
                for c in 0..rhs.ncols {
                    out[(r, c)] += a * rhs[(k, c)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> DenseMatrix<T> {
        DenseMatrix::from_fn(self.ncols, self.nrows, |r, c| self[(c, r)])
    }

    /// Solves `A x = b` by Gaussian elimination with partial pivoting.
    pub fn lu_solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.nrows;
        if self.ncols != n || b.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: b.len(),
                context: "dense LU",
            });
        }
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|r| (r, a[r * n + k].modulus()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == 0.0 || !pmax.is_finite() {
                return Err(Error::Factorization(format!("dense LU: singular pivot at column {k}")));
            }
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                x.swap(k, p);
            }
            let pivot = a[k * n + k];
            for r in k + 1..n {
                let factor = a[r * n + k] / pivot;
                if factor == T::zero() {
                    continue;
                }
                for c in k..n {
                    let akc = a[k * n + c];
                    a[r * n + c] -= factor * akc;
                }
                let xk = x[k];
                x[r] -= factor * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for c in k + 1..n {
                s -= a[k * n + c] * x[c];
            }
            x[k] = s / a[k * n + k];
        }
        Ok(x)
    }
}

impl DenseMatrix<f64> {
    /// Solves a symmetric positive definite system with an `L D Lᵀ` factorization.
    pub fn ldlt_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.nrows;
        if self.ncols != n || b.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: b.len(),
                context: "dense LDLt",
            });
        }
        let mut l = vec![0.0; n * n];
        let mut d = vec![0.0; n];
        for j in 0..n {
            let mut dj = self[(j, j)];
            for k in 0..j {
                dj -= l[j * n + k] * l[j * n + k] * d[k];
            }
            if !(dj > 0.0 && dj.is_finite()) {
                return Err(Error::Factorization(format!("dense LDLt: non-positive pivot {dj:e} at {j}")));
            }
            d[j] = dj;
            l[j * n + j] = 1.0;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k] * d[k];
                }
                l[i * n + j] = s / dj;
            }
        }
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= l[i * n + k] * y[k];
            }
        }
        for i in 0..n {
            y[i] /= d[i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= l[k * n + i] * y[k];
            }
        }
        Ok(y)
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.ncols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.ncols + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn ldlt_small_spd() {
        let a = DenseMatrix::from_fn(3, 3, |r, c| if r == c { 4.0 } else { 1.0 });
        let x = a.ldlt_solve(&[6.0, 6.0, 6.0]).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-15);
        }
        let indefinite = DenseMatrix::from_fn(2, 2, |r, c| if r == c { 0.0 } else { 1.0 });
        assert!(indefinite.ldlt_solve(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn complex_lu_closed_form() {
        let mut a = DenseMatrix::<Complex64>::zeros(2, 2);
        a[(0, 0)] = Complex64::new(1.0, 1.0);
        a[(1, 1)] = Complex64::new(2.0, 0.0);
        let x = a.lu_solve(&[Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)]).unwrap();
        assert!((x[0] - Complex64::new(0.5, -0.5)).norm() < 1e-15);
        assert!((x[1] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn lu_needs_pivoting() {
        let a = DenseMatrix::from_fn(2, 2, |r, c| if r == c { 0.0 } else { 1.0 });
        let x = a.lu_solve(&[2.0, 3.0]).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
    }
}
