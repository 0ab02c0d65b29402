//! Small dense linear algebra used by the calculus and regression code.
//!
//! Dimensions here are tiny (state dimensions `k, d, ℓ` of a few units,
//! regression bases of a few dozen functions), so everything is hand-rolled
//! over flat slices; matrices are row-major.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Euclidean norm of a vector (or Frobenius norm of a flattened matrix).
#[inline]
pub fn norm(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

/// `out = m · v` for a row-major `rows × cols` matrix.
pub fn mat_vec(m: &[f64], v: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(v.len(), cols);
    debug_assert_eq!(out.len(), rows);
    for r in 0..rows {
        out[r] = dot(&m[r * cols..(r + 1) * cols], v);
    }
}

/// `out = mᵀ · v` for a row-major `rows × cols` matrix.
pub fn mat_t_vec(m: &[f64], v: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    debug_assert_eq!(v.len(), rows);
    debug_assert_eq!(out.len(), cols);
    out.fill(0.0);
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        for c in 0..cols {
            out[c] += row[c] * v[r];
        }
    }
}

/// In-place Cholesky factorization `a = L·Lᵀ` of a symmetric positive
/// definite row-major `n × n` matrix; the lower triangle is overwritten.
///
/// Returns a condition-number estimate `(max_i L_ii / min_i L_ii)²`. Fails
/// when a pivot is not strictly positive.
pub fn cholesky(a: &mut [f64], n: usize) -> Result<f64> {
    debug_assert_eq!(a.len(), n * n);
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::SingularRegression {
                step: usize::MAX,
                cond: f64::INFINITY,
            });
        }
        let ljj = math::sqrt(diag);
        a[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / ljj;
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0_f64;
    for j in 0..n {
        let v = a[j * n + j];
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let ratio = hi / lo;
    Ok(ratio * ratio)
}

/// Solves `L·Lᵀ x = rhs` in place given the factor from [`cholesky`].
pub fn cholesky_solve(l: &[f64], n: usize, rhs: &mut [f64]) {
    debug_assert_eq!(rhs.len(), n);
    // forward substitution L y = rhs
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[i * n + k] * rhs[k];
        }
        rhs[i] = s / l[i * n + i];
    }
    // back substitution Lᵀ x = y
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for k in i + 1..n {
            s -= l[k * n + i] * rhs[k];
        }
        rhs[i] = s / l[i * n + i];
    }
}

/// Solves the ridge-regularized normal equations `(XᵀX + ridge·I) β = Xᵀy`
/// for several right-hand sides at once.
///
/// `design` is `rows × cols` row-major, `targets` is a list of `rows`-long
/// regressands. Returns the coefficient vectors and the condition estimate
/// of the factored Gram matrix.
pub fn ridge_least_squares(
    design: &[f64],
    rows: usize,
    cols: usize,
    targets: &[&[f64]],
    ridge: f64,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let mut gram = vec![0.0; cols * cols];
    for r in 0..rows {
        let row = &design[r * cols..(r + 1) * cols];
        for i in 0..cols {
            for j in 0..=i {
                gram[i * cols + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..cols {
        for j in i + 1..cols {
            gram[i * cols + j] = gram[j * cols + i];
        }
        gram[i * cols + i] += ridge;
    }
    let cond = cholesky(&mut gram, cols)?;
    let mut betas = Vec::with_capacity(targets.len());
    for target in targets {
        let mut rhs = vec![0.0; cols];
        mat_t_vec(design, target, rows, cols, &mut rhs);
        cholesky_solve(&gram, cols, &mut rhs);
        betas.push(rhs);
    }
    Ok((betas, cond))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        // A = [[4,2],[2,3]], b = [8, 7] -> x = [1.3..., 1.4...]
        let mut a = [4.0, 2.0, 2.0, 3.0];
        let cond = cholesky(&mut a, 2).unwrap();
        assert!(cond >= 1.0);
        let mut rhs = [8.0, 7.0];
        cholesky_solve(&a, 2, &mut rhs);
        // verify A x = b
        assert!((4.0 * rhs[0] + 2.0 * rhs[1] - 8.0).abs() < 1e-12);
        assert!((2.0 * rhs[0] + 3.0 * rhs[1] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = [1.0, 2.0, 2.0, 1.0];
        assert!(cholesky(&mut a, 2).is_err());
    }

    #[test]
    fn least_squares_recovers_exact_coefficients() {
        // y = 2 + 3 x over x in {0..9}, basis {1, x}.
        let rows = 10;
        let mut design = Vec::new();
        let mut y = Vec::new();
        for i in 0..rows {
            let x = i as f64;
            design.extend_from_slice(&[1.0, x]);
            y.push(2.0 + 3.0 * x);
        }
        let (betas, _) = ridge_least_squares(&design, rows, 2, &[&y], 0.0).unwrap();
        assert!((betas[0][0] - 2.0).abs() < 1e-10);
        assert!((betas[0][1] - 3.0).abs() < 1e-10);
    }
}
