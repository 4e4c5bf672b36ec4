use crate::error::{Error, Result};

use super::{CsrMatrix, Scalar};

/// Symmetric elimination of prescribed unknowns from `K x = b`.
///
/// The free block `K_ff` keeps the symmetry (and definiteness) of `K`; the
/// coupling block `K_fc` moves known values to the right-hand side.
#[derive(Debug, Clone)]
pub struct ConstrainedSystem<T> {
    n: usize,
    free: Vec<usize>,
    fixed: Vec<usize>,
    k_ff: CsrMatrix<T>,
    k_fc: CsrMatrix<T>,
}

impl<T: Scalar> ConstrainedSystem<T> {
    /// `is_fixed[i]` marks unknown `i` as prescribed.
    pub fn new(k: &CsrMatrix<T>, is_fixed: &[bool]) -> Result<Self> {
        let n = k.nrows();
        if k.ncols() != n || is_fixed.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: is_fixed.len(),
                context: "constraint mask",
            });
        }
        let free: Vec<usize> = (0..n).filter(|&i| !is_fixed[i]).collect();
        let fixed: Vec<usize> = (0..n).filter(|&i| is_fixed[i]).collect();
        let mut free_map = vec![None; n];
        let mut fixed_map = vec![None; n];
        for (j, &i) in free.iter().enumerate() {
            free_map[i] = Some(j);
        }
        for (j, &i) in fixed.iter().enumerate() {
            fixed_map[i] = Some(j);
        }
        Ok(Self {
            n,
            k_ff: k.select(&free, &free_map, free.len()),
            k_fc: k.select(&free, &fixed_map, fixed.len()),
            free,
            fixed,
        })
    }

    pub fn full_size(&self) -> usize {
        self.n
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn fixed(&self) -> &[usize] {
        &self.fixed
    }

    pub fn free_matrix(&self) -> &CsrMatrix<T> {
        &self.k_ff
    }

    pub fn into_free_matrix(self) -> CsrMatrix<T> {
        self.k_ff
    }

    /// Restricts a full-length vector to the free unknowns.
    pub fn restrict(&self, x: &[T]) -> Vec<T> {
        self.free.iter().map(|&i| x[i]).collect()
    }

    /// `b_f − K_fc x_c` where `x_c` are the prescribed values, given as a
    /// full-length vector (free entries ignored).
    pub fn reduce_rhs(&self, b: &[T], prescribed: &[T]) -> Result<Vec<T>> {
        self.check_len(b.len(), "constrained rhs")?;
        self.check_len(prescribed.len(), "prescribed values")?;
        let xc: Vec<T> = self.fixed.iter().map(|&i| prescribed[i]).collect();
        let coupling = self.k_fc.spmv(&xc)?;
        Ok(self
            .free
            .iter()
            .zip(&coupling)
            .map(|(&i, &c)| b[i] - c)
            .collect())
    }

    /// Scatters free values into a full vector whose fixed entries are copied
    /// from `prescribed`.
    pub fn expand(&self, x_free: &[T], prescribed: &[T]) -> Result<Vec<T>> {
        self.check_len(prescribed.len(), "prescribed values")?;
        if x_free.len() != self.free.len() {
            return Err(Error::Dimension {
                expected: self.free.len(),
                got: x_free.len(),
                context: "free solution",
            });
        }
        let mut x = vec![T::zero(); self.n];
        for &i in &self.fixed {
            x[i] = prescribed[i];
        }
        for (&i, &v) in self.free.iter().zip(x_free) {
            x[i] = v;
        }
        Ok(x)
    }

    fn check_len(&self, got: usize, context: &'static str) -> Result<()> {
        if got != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got,
                context,
            });
        }
        Ok(())
    }
}
