//! Dense symmetric positive-definite solves for the normal equations.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Solves `A x = b` for symmetric positive-definite `A` (row-major, `n × n`)
/// by Cholesky factorisation.
pub fn cholesky_solve<T: Scalar>(a: &[T], b: &[T], n: usize) -> Result<Vec<T>> {
    if a.len() != n * n || b.len() != n {
        return Err(Error::Numerical(format!(
            "cholesky_solve: shape mismatch (a: {}, b: {}, n: {n})",
            a.len(),
            b.len()
        )));
    }
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= T::zero() || !sum.is_finite() {
                    return Err(Error::Numerical(format!(
                        "matrix not positive definite at pivot {i}"
                    )));
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    Ok(x)
}

/// Ridge least squares: minimises `‖X w − y‖² + ridge · Σ_{j ∈ penalized} w_j²`.
/// `rows` are the design rows; `penalize[j]` selects which coefficients are
/// regularised (intercepts usually are not).
pub fn ridge_least_squares<T: Scalar>(
    rows: &[Vec<T>],
    targets: &[T],
    ridge: T,
    penalize: &[bool],
) -> Result<Vec<T>> {
    let p = penalize.len();
    let mut gram = vec![T::zero(); p * p];
    let mut rhs = vec![T::zero(); p];
    for (row, &y) in rows.iter().zip(targets) {
        for i in 0..p {
            rhs[i] += row[i] * y;
            for j in 0..=i {
                gram[i * p + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            gram[j * p + i] = gram[i * p + j];
        }
        if penalize[i] {
            gram[i * p + i] += ridge;
        }
    }
    cholesky_solve(&gram, &rhs, p)
}
