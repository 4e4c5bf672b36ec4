use crate::error::{Error, Result};
use crate::grid::IncidenceMatrix;

use super::dense::DenseMatrix;
use super::Scalar;

/// Compressed sparse row matrix with sorted column indices and no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// in input order; entries that sum to exactly zero are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        for &(r, c, _) in &triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) outside {nrows}x{ncols}");
        }
        // stable: duplicate sums accumulate in insertion order, which keeps
        // symmetric assemblies bitwise symmetric
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut vals: Vec<T> = Vec::with_capacity(triplets.len());
        let mut iter = triplets.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v != T::zero() {
                col_idx.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![T::one(); n])
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        Self::from_triplets(d.len(), d.len(), d.iter().enumerate().map(|(i, v)| (i, i, *v)).collect())
    }

    pub fn from_dense(a: &DenseMatrix<T>) -> Self {
        let mut t = Vec::new();
        for r in 0..a.nrows() {
            for c in 0..a.ncols() {
                t.push((r, c, a[(r, c)]));
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col_idx[s..e].iter().copied().zip(self.vals[s..e].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
        match self.col_idx[s..e].binary_search(&c) {
            Ok(k) => self.vals[s + k],
            Err(_) => T::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Sparse matrix-vector product.
    pub fn spmv(&self, x: &[T]) -> Result<Vec<T>> {
        let mut y = vec![T::zero(); self.nrows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[T], y: &mut [T]) -> Result<()> {
        if x.len() != self.ncols {
            return Err(Error::Dimension {
                expected: self.ncols,
                got: x.len(),
                context: "spmv input",
            });
        }
        if y.len() != self.nrows {
            return Err(Error::Dimension {
                expected: self.nrows,
                got: y.len(),
                context: "spmv output",
            });
        }
        for (r, out) in y.iter_mut().enumerate() {
            let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let mut acc = T::zero();
            for k in s..e {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(r, c, v)| (c, r, v)).collect())
    }

    /// `‖A − Aᵀ‖` as the largest entrywise modulus.
    pub fn max_asymmetry(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols, "asymmetry of a non-square matrix");
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r)).modulus())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self) -> bool {
        self.nrows == self.ncols && self.max_asymmetry() == 0.0
    }

    /// `self + diag(d)`.
    pub fn add_diagonal(&self, d: &[T]) -> Self {
        assert_eq!(d.len(), self.nrows.min(self.ncols));
        let mut t: Vec<_> = self.triplets().collect();
        t.extend(d.iter().enumerate().map(|(i, v)| (i, i, *v)));
        Self::from_triplets(self.nrows, self.ncols, t)
    }

    /// `alpha · self`.
    pub fn scaled(&self, alpha: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.vals {
            *v *= alpha;
        }
        out
    }

    /// Submatrix on the given row and column index lists (order preserved).
    pub fn select(&self, rows: &[usize], col_map: &[Option<usize>], ncols: usize) -> Self {
        let mut t = Vec::new();
        for (new_r, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if let Some(new_c) = col_map[c] {
                    t.push((new_r, new_c, v));
                }
            }
        }
        Self::from_triplets(rows.len(), ncols, t)
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            d[(r, c)] = v;
        }
        d
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            vals: self.vals.iter().map(|v| f(*v)).collect(),
        }
    }
}

/// Weighted Gram product `Dᵀ · diag(w) · D` of an incidence operator.
pub fn weighted_gram<T: Scalar>(op: &IncidenceMatrix, weights: &[T]) -> CsrMatrix<T> {
    assert_eq!(weights.len(), op.rows(), "weighted_gram: weight length");
    let mut t = Vec::with_capacity(op.nnz() * 4);
    for (r, &w) in weights.iter().enumerate() {
        let row: Vec<(usize, i8)> = op.row(r).collect();
        for &(ci, si) in &row {
            for &(cj, sj) in &row {
                t.push((ci, cj, w * f64::from(si * sj)));
            }
        }
    }
    CsrMatrix::from_triplets(op.cols(), op.cols(), t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_gradient, StructuredGrid};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_spmv() {
        let x = vec![1.0, -2.0, 3.5];
        assert_eq!(CsrMatrix::<f64>::identity(3).spmv(&x).unwrap(), x);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = StructuredGrid::new(2, 2, 2, 1e-3, 1e-3, 1e-3).unwrap();
        let grad = build_gradient(&g);
        let m = CsrMatrix::from_triplets(
            grad.rows(),
            grad.cols(),
            grad.triplets().map(|(r, c, v)| (r, c, f64::from(v))).collect(),
        );
        assert!(m.spmv(&[3.25; 8]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn random_spmv_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut t = Vec::new();
        for _ in 0..80 {
            t.push((rng.random_range(0..20), rng.random_range(0..20), rng.random_range(-1.0..1.0)));
        }
        let a = CsrMatrix::from_triplets(20, 20, t);
        let x: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dense = a.to_dense();
        let y = a.spmv(&x).unwrap();
        for r in 0..20 {
            let expect: f64 = (0..20).map(|c| dense[(r, c)] * x[c]).sum();
            assert!((y[r] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let a = CsrMatrix::<f64>::identity(3);
        assert!(matches!(a.spmv(&[1.0, 2.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn duplicates_summed_and_zeros_dropped() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (0, 1, -1.0), (1, 0, 2.0), (1, 0, 0.5)]);
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.get(1, 0), 2.5);
        assert_eq!(a.get(0, 1), 0.0);
    }

    #[test]
    fn gram_is_symmetric_complex() {
        let g = StructuredGrid::new(3, 3, 2, 1.0, 1.0, 1.0).unwrap();
        let grad = build_gradient(&g);
        let w: Vec<Complex64> = (0..grad.rows()).map(|i| Complex64::new(1.0 + i as f64, 0.3 * i as f64)).collect();
        let k = weighted_gram(&grad, &w);
        assert!(k.is_symmetric());
        let transposed = k.transpose();
        assert_eq!(k, transposed);
    }
}
