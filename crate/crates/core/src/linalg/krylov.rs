//! Jacobi-preconditioned conjugate gradients. With the unconjugated bilinear
//! form the same recurrence is COCG for complex symmetric matrices.

use std::time::Instant;

use num_complex::Complex64;

use crate::error::{Error, Result};

use super::{dot, norm2, CsrMatrix, Scalar, SolveReport};

/// Number of times the iteration is restarted from the true residual when the
/// recursive residual has drifted below the tolerance too early.
const MAX_RESTARTS: usize = 5;

pub(crate) fn jacobi_inverse<T: Scalar>(a: &CsrMatrix<T>) -> Result<Vec<T>> {
    a.diagonal()
        .into_iter()
        .map(|d| {
            if d == T::zero() || !d.finite() {
                Err(Error::Factorization("zero or non-finite diagonal in Jacobi preconditioner".into()))
            } else {
                Ok(T::one() / d)
            }
        })
        .collect()
}

pub(crate) fn true_residual<T: Scalar>(a: &CsrMatrix<T>, b: &[T], x: &[T]) -> Result<f64> {
    let bn = norm2(b);
    let ax = a.spmv(x)?;
    let rn = norm2(&b.iter().zip(&ax).map(|(u, v)| *u - *v).collect::<Vec<_>>());
    Ok(if bn == 0.0 { rn } else { rn / bn })
}

pub(crate) fn preconditioned_cg<T: Scalar>(
    a: &CsrMatrix<T>,
    b: &[T],
    x0: Option<&[T]>,
    diag_inv: &[T],
    tol: f64,
    max_iter: usize,
    method: &'static str,
) -> Result<(Vec<T>, SolveReport)> {
    let start = Instant::now();
    let n = a.nrows();
    if b.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: b.len(),
            context: method,
        });
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Config(format!("solver tolerance {tol} must lie in (0, 1)")));
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((
            vec![T::zero(); n],
            SolveReport {
                iterations: 0,
                relative_residual: 0.0,
                wall_time: start.elapsed().as_secs_f64(),
                method,
            },
        ));
    }
    let mut x = match x0 {
        Some(g) if g.len() == n => g.to_vec(),
        Some(g) => {
            return Err(Error::Dimension {
                expected: n,
                got: g.len(),
                context: "initial guess",
            })
        }
        None => vec![T::zero(); n],
    };
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut ap = vec![T::zero(); n];

    for _restart in 0..=MAX_RESTARTS {
        a.spmv_into(&x, &mut ap)?;
        let mut r: Vec<T> = b.iter().zip(&ap).map(|(u, v)| *u - *v).collect();
        let mut rel = norm2(&r) / bnorm;
        history.push(rel);
        if rel <= tol {
            break;
        }
        let mut z: Vec<T> = r.iter().zip(diag_inv).map(|(u, d)| *u * *d).collect();
        let mut p = z.clone();
        let mut rho = dot(&r, &z);
        while iterations < max_iter {
            if !rho.finite() {
                return Err(Error::NonFinite(method));
            }
            a.spmv_into(&p, &mut ap)?;
            let pap = dot(&p, &ap);
            if pap == T::zero() || rho == T::zero() {
                // breakdown: restart from the current iterate
                break;
            }
            let alpha = rho / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            rel = norm2(&r) / bnorm;
            history.push(rel);
            if !rel.is_finite() {
                return Err(Error::NonFinite(method));
            }
            if rel <= tol {
                break;
            }
            for i in 0..n {
                z[i] = r[i] * diag_inv[i];
            }
            let rho_next = dot(&r, &z);
            let beta = rho_next / rho;
            rho = rho_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        if iterations >= max_iter {
            break;
        }
    }

    let relative_residual = true_residual(a, b, &x)?;
    if !relative_residual.is_finite() {
        return Err(Error::NonFinite(method));
    }
    if relative_residual > tol {
        return Err(Error::NotConverged {
            method,
            iterations,
            residual: relative_residual,
            history,
        });
    }
    Ok((
        x,
        SolveReport {
            iterations,
            relative_residual,
            wall_time: start.elapsed().as_secs_f64(),
            method,
        },
    ))
}

/// Solves a symmetric positive definite system with Jacobi-preconditioned CG
/// from a zero initial guess.
pub fn solve_spd(a: &CsrMatrix<f64>, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveReport)> {
    solve_spd_from(a, b, None, tol, max_iter)
}

pub fn solve_spd_from(
    a: &CsrMatrix<f64>,
    b: &[f64],
    guess: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let d = jacobi_inverse(a)?;
    preconditioned_cg(a, b, guess, &d, tol, max_iter, "pcg-jacobi")
}

/// Solves a complex symmetric (`Aᵀ = A`, not Hermitian) system with
/// Jacobi-preconditioned COCG.
pub fn solve_complex_symmetric(
    a: &CsrMatrix<Complex64>,
    b: &[Complex64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<Complex64>, SolveReport)> {
    solve_complex_symmetric_from(a, b, None, tol, max_iter)
}

pub fn solve_complex_symmetric_from(
    a: &CsrMatrix<Complex64>,
    b: &[Complex64],
    guess: Option<&[Complex64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<Complex64>, SolveReport)> {
    let d = jacobi_inverse(a)?;
    preconditioned_cg(a, b, guess, &d, tol, max_iter, "cocg-jacobi")
}
