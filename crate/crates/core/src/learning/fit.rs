//! Weighted nonlinear fit of `A f^k` to per-depth fidelity means.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::PauliString;

const F_MIN: f64 = 1e-6;

/// Per-depth mean eigenvalues of one basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayData {
    pub basis: PauliString,
    pub depths: Vec<usize>,
    pub means: Vec<f64>,
    pub stderrs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub basis: PauliString,
    pub a: f64,
    pub f: f64,
    pub a_stderr: f64,
    pub f_stderr: f64,
}

fn weighted_line(k: &[f64], y: &[f64], w: &[f64]) -> Option<(f64, f64)> {
    let sw: f64 = w.iter().sum();
    let kx: f64 = k.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ky: f64 = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = k.iter().zip(w).map(|(a, b)| b * (a - kx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = k
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, c), b)| b * (a - kx) * (c - ky))
        .sum();
    let slope = sxy / sxx;
    Some((ky - slope * kx, slope))
}

/// Fits `mean(k) ≈ A f^k`.
///
/// Depths with positive means seed a log-linear initial guess; all points
/// enter the Levenberg–Marquardt refinement with weights `1/stderr²`. When
/// no standard errors are available the points are weighted equally and the
/// covariance is scaled by the residual variance.
pub fn fit_decay(d: &DecayData) -> Result<FidelityEstimate> {
    let npts = d.depths.len();
    if npts == 0 || d.means.len() != npts || d.stderrs.len() != npts {
        return Err(Error::Unfittable(d.basis.label()));
    }
    if d.means.iter().chain(&d.stderrs).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("decay data of {}", d.basis)));
    }
    let k: Vec<f64> = d.depths.iter().map(|&k| k as f64).collect();
    let min_se = d
        .stderrs
        .iter()
        .copied()
        .filter(|&s| s > 0.0)
        .fold(f64::INFINITY, f64::min);
    let have_se = min_se.is_finite();
    let w: Vec<f64> = d
        .stderrs
        .iter()
        .map(|&s| if have_se { 1.0 / s.max(min_se).powi(2) } else { 1.0 })
        .collect();

    let pos: Vec<usize> = (0..npts).filter(|&i| d.means[i] > 0.0).collect();
    let lk: Vec<f64> = pos.iter().map(|&i| k[i]).collect();
    let ly: Vec<f64> = pos.iter().map(|&i| d.means[i].ln()).collect();
    // delta method: var(ln y) ≈ var(y) / y²
    let lw: Vec<f64> = pos.iter().map(|&i| w[i] * d.means[i].powi(2)).collect();
    let (ln_a, ln_f) = weighted_line(&lk, &ly, &lw).ok_or_else(|| Error::Unfittable(d.basis.label()))?;
    let mut a = ln_a.exp();
    let mut f = ln_f.exp().clamp(F_MIN, 1.0);

    let cost = |a: f64, f: f64| -> f64 {
        (0..npts)
            .map(|i| w[i] * (d.means[i] - a * f.powf(k[i])).powi(2))
            .sum()
    };
    let normal = |a: f64, f: f64| {
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for i in 0..npts {
            let fk = f.powf(k[i]);
            let j = [fk, if k[i] == 0.0 { 0.0 } else { a * k[i] * f.powf(k[i] - 1.0) }];
            let r = d.means[i] - a * fk;
            for p in 0..2 {
                jtr[p] += w[i] * j[p] * r;
                for q in 0..2 {
                    jtj[p][q] += w[i] * j[p] * j[q];
                }
            }
        }
        (jtj, jtr)
    };

    let mut c = cost(a, f);
    let mut mu = 1e-3;
    for _ in 0..200 {
        let (jtj, jtr) = normal(a, f);
        let m = [
            [jtj[0][0] * (1.0 + mu), jtj[0][1]],
            [jtj[1][0], jtj[1][1] * (1.0 + mu)],
        ];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det.abs() < 1e-300 {
            break;
        }
        let da = (m[1][1] * jtr[0] - m[0][1] * jtr[1]) / det;
        let df = (m[0][0] * jtr[1] - m[1][0] * jtr[0]) / det;
        let (na, nf) = (a + da, (f + df).clamp(F_MIN, 1.0));
        let nc = cost(na, nf);
        if nc <= c {
            let done = (na - a).abs() < 1e-15 * a.abs().max(1.0) && (nf - f).abs() < 1e-15;
            a = na;
            f = nf;
            let improved = c - nc;
            c = nc;
            mu = (mu * 0.3).max(1e-12);
            if done || improved <= 1e-30 {
                break;
            }
        } else {
            mu *= 10.0;
            if mu > 1e12 {
                break;
            }
        }
    }

    let (jtj, _) = normal(a, f);
    let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
    let scale = if have_se || npts <= 2 {
        1.0
    } else {
        c / (npts - 2) as f64
    };
    let (a_var, f_var) = if det.abs() > 1e-300 {
        (jtj[1][1] / det * scale, jtj[0][0] / det * scale)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(FidelityEstimate {
        basis: d.basis.clone(),
        a,
        f,
        a_stderr: a_var.max(0.0).sqrt(),
        f_stderr: f_var.max(0.0).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(depths: &[usize], a: f64, f: f64) -> DecayData {
        DecayData {
            basis: "Z".parse().unwrap(),
            depths: depths.to_vec(),
            means: depths.iter().map(|&k| a * f.powi(k as i32)).collect(),
            stderrs: vec![0.0; depths.len()],
        }
    }

    #[test]
    fn exact_recovery() {
        let e = fit_decay(&data(&[0, 2, 4, 8, 16], 0.95, 0.98)).unwrap();
        assert!((e.a - 0.95).abs() < 1e-9 && (e.f - 0.98).abs() < 1e-9, "{e:?}");
    }

    #[test]
    fn constant_data() {
        let e = fit_decay(&data(&[0, 1, 2, 4], 1.0, 1.0)).unwrap();
        assert!((e.a - 1.0).abs() < 1e-12 && (e.f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_means() {
        let mut d = data(&[0, 1, 2], 1.0, 0.5);
        d.means = vec![-0.1, -0.2, 0.0];
        assert!(matches!(fit_decay(&d), Err(Error::Unfittable(_))));
        // a negative tail is kept in the nonlinear stage
        let mut d = data(&[0, 2, 4, 8, 16], 0.9, 0.7);
        d.means[4] = -0.001;
        d.stderrs = vec![0.01; 5];
        let e = fit_decay(&d).unwrap();
        assert!((e.f - 0.7).abs() < 0.01, "{e:?}");
    }
}
