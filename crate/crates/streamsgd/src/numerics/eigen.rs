use super::linalg::Mat;
use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 100;
pub const DEFAULT_FLOOR: f64 = 1e-10;

/// Eigendecomposition `A = U diag(values) U^T` of a symmetric matrix.
/// Column `j` of `vectors` pairs with `values[j]`; values are descending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub vectors: Mat,
    pub values: Vec<f64>,
}

impl SymEigen {
    pub fn reconstruct(&self) -> Mat {
        let n = self.values.len();
        Mat::from_fn(n, |i, j| {
            (0..n)
                .map(|k| self.vectors[(i, k)] * self.values[k] * self.vectors[(j, k)])
                .sum()
        })
    }
}

fn off_diagonal_norm(a: &Mat) -> f64 {
    let n = a.n();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigensolver.
///
/// Stops when the off-diagonal Frobenius mass drops to `tol * ||A||_F`
/// (clamped to a few ulps, below which no rotation can make progress).
pub fn sym_eigendecompose(a: &Mat, tol: f64) -> Result<SymEigen> {
    let n = a.n();
    if !a.is_finite() {
        return Err(Error::NonFinite("sym_eigendecompose"));
    }
    let allowed = 1e-12 * a.max_abs();
    let asym = a.max_asymmetry();
    if asym > allowed {
        return Err(Error::NotSymmetric {
            asymmetry: asym,
            allowed,
        });
    }
    let mut m = Mat::from_fn(n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let mut v = Mat::identity(n);
    let scale = m.frobenius_norm();
    let threshold = tol.max(f64::EPSILON * n as f64) * scale;

    let mut converged = off_diagonal_norm(&m) <= threshold;
    let mut sweep = 0;
    while !converged {
        if sweep == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
        }
        sweep += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        converged = off_diagonal_norm(&m) <= threshold;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Mat::from_fn(n, |i, j| v[(i, order[j])]);
    Ok(SymEigen { vectors, values })
}

/// `U diag(lambda^{-1/2}) U^T` for a symmetric PSD matrix.
pub fn inv_sqrt_psd(a: &Mat, floor: f64) -> Result<Mat> {
    let eig = sym_eigendecompose(a, 1e-13)?;
    for (index, &value) in eig.values.iter().enumerate() {
        if value < floor {
            return Err(Error::SingularCovariance {
                index,
                value,
                floor,
            });
        }
    }
    let n = a.n();
    let u = &eig.vectors;
    let w: Vec<f64> = eig.values.iter().map(|l| 1.0 / l.sqrt()).collect();
    Ok(Mat::from_fn(n, |i, j| {
        (0..n).map(|k| u[(i, k)] * w[k] * u[(j, k)]).sum()
    }))
}
