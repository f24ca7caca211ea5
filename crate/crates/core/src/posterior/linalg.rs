//! Small dense kernels for the sampler's inner loop. Matrices are row-major
//! `d x d` slices; only the lower triangle of a factor is meaningful.

use crate::error::{Error, Result};

const MAX_JITTER_DOUBLINGS: usize = 8;

/// In-place Cholesky factorization `a = L L^T`. Returns false when a pivot
/// is not strictly positive.
pub(crate) fn cholesky_in_place(a: &mut [f64], d: usize) -> bool {
    for j in 0..d {
        let mut diag = a[j * d + j];
        for k in 0..j {
            diag -= a[j * d + k] * a[j * d + k];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return false;
        }
        let ljj = diag.sqrt();
        a[j * d + j] = ljj;
        for i in (j + 1)..d {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= a[i * d + k] * a[j * d + k];
            }
            a[i * d + j] = s / ljj;
        }
    }
    true
}

/// Factorizes a symmetric positive definite matrix, adding a growing
/// multiple of the identity when the plain factorization fails.
pub(crate) fn factor_with_jitter(a: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut l = a.to_vec();
    if cholesky_in_place(&mut l, d) {
        return Ok(l);
    }
    let trace: f64 = (0..d).map(|i| a[i * d + i]).sum();
    let scale = if trace > 0.0 && trace.is_finite() { trace / d as f64 } else { 1.0 };
    let mut jitter = 1e-9 * scale;
    for _ in 0..MAX_JITTER_DOUBLINGS {
        l.copy_from_slice(a);
        for i in 0..d {
            l[i * d + i] += jitter;
        }
        if cholesky_in_place(&mut l, d) {
            return Ok(l);
        }
        jitter *= 2.0;
    }
    Err(Error::Numerical(format!(
        "Cholesky factorization of a {d}x{d} matrix failed after {MAX_JITTER_DOUBLINGS} jitter doublings"
    )))
}

/// Solves `L x = b` in place.
pub(crate) fn solve_lower(l: &[f64], d: usize, b: &mut [f64]) {
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * d + k] * b[k];
        }
        b[i] = s / l[i * d + i];
    }
}

/// Solves `L^T x = b` in place.
pub(crate) fn solve_lower_transpose(l: &[f64], d: usize, b: &mut [f64]) {
    for i in (0..d).rev() {
        let mut s = b[i];
        for k in (i + 1)..d {
            s -= l[k * d + i] * b[k];
        }
        b[i] = s / l[i * d + i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_and_solve_against_nalgebra() {
        let m = nalgebra::DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let l = factor_with_jitter(m.as_slice(), 3).unwrap();
        let b = [1.0, -2.0, 0.5];
        let mut x = b;
        solve_lower(&l, 3, &mut x);
        solve_lower_transpose(&l, 3, &mut x);
        let want = m.clone().lu().solve(&nalgebra::DVector::from_column_slice(&b)).unwrap();
        for i in 0..3 {
            assert!((x[i] - want[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn jitter_repairs_semidefinite_input() {
        let a = [1.0, 1.0, 1.0, 1.0];
        assert!(factor_with_jitter(&a, 2).is_ok());
    }

    #[test]
    fn indefinite_input_is_a_hard_error() {
        let a = [1.0, 0.0, 0.0, -1.0];
        assert!(matches!(factor_with_jitter(&a, 2), Err(Error::Numerical(_))));
    }
}
