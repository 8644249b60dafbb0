//! Lawson–Hanson active-set non-negative least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let tol = f64::EPSILON * a.nrows().max(a.ncols()) as f64 * svd.singular_values.max();
    svd.solve(b, tol).expect("SVD with both factors")
}

fn columns(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), idx.len(), |i, j| a[(i, idx[j])])
}

/// `argmin ‖A x − b‖₂` subject to `x ≥ 0`.
pub fn nnls_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.nrows(),
            right: b.len(),
        });
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("NNLS input".into()));
    }
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    if n == 0 {
        return Ok(x);
    }
    let norm = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 10.0 * f64::EPSILON * norm * a.nrows().max(n) as f64;
    let mut passive = vec![false; n];
    let at = a.transpose();

    for _ in 0..3 * n + 10 {
        let w = &at * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        if w[j] <= tol {
            break;
        }
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let sp = lstsq(&columns(a, &idx), b);
            if sp.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &i) in idx.iter().enumerate() {
                    x[i] = sp[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &i) in idx.iter().enumerate() {
                if sp[k] <= 0.0 {
                    alpha = alpha.min(x[i] / (x[i] - sp[k]));
                }
            }
            for (k, &i) in idx.iter().enumerate() {
                x[i] += alpha * (sp[k] - x[i]);
            }
            for &i in &idx {
                if x[i] <= tol {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton() {
        let a = DMatrix::from_element(1, 1, 1.0);
        let b = DVector::from_element(1, -(0.98f64).ln() / 2.0);
        let x = nnls_solve(&a, &b).unwrap();
        assert!((x[0] - b[0]).abs() < 1e-15 && (x[0] - 0.010_101_353_658).abs() < 1e-12);
    }

    #[test]
    fn zero_rhs() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let x = nnls_solve(&a, &DVector::zeros(2)).unwrap();
        assert_eq!(x, DVector::zeros(2));
    }

    #[test]
    fn clamps_negative_direction() {
        // unconstrained solution is (2, -1); constrained optimum puts x1 = 0
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, -1.0, 1.0]);
        let x = nnls_solve(&a, &b).unwrap();
        assert!(x[1] == 0.0 && (x[0] - 1.5).abs() < 1e-12, "{x}");
    }

    #[test]
    fn rejects_nan() {
        let a = DMatrix::from_element(1, 1, f64::NAN);
        assert!(nnls_solve(&a, &DVector::zeros(1)).is_err());
    }
}
