//! Symmetric factorization of covariance matrices.
//!
//! Sampling a zero-mean Gaussian vector with covariance `A` needs a
//! factor `F` with `F F^T = A`. The covariance matrices here are often
//! exactly singular (surrogate covariances have vanishing row sums), so
//! plain Cholesky is tried first, escalating diagonal jitter from 1e-12
//! to 1e-8 of the trace scale, and a Jacobi eigendecomposition with
//! negative eigenvalues clipped at zero is the fallback. Matrices whose
//! most negative eigenvalue is below `-1e-8 * trace_scale` are rejected
//! as not positive semidefinite.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Which regularization produced the factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularization {
    /// Plain Cholesky succeeded.
    None,
    /// Cholesky after adding `jitter` to the diagonal.
    Jitter(f64),
    /// Eigendecomposition with negatives clipped; records the most
    /// negative eigenvalue that was clipped away.
    EigenClip { min_eigenvalue: f64 },
}

/// A factor `F` (row-major `n x n`) with `F F^T` equal to the input up to
/// the applied regularization.
#[derive(Debug, Clone)]
pub struct SymmetricFactor {
    n: usize,
    factor: Vec<f64>,
    lower_triangular: bool,
    pub regularization: Regularization,
}

const JITTER_LADDER: [f64; 3] = [1e-12, 1e-10, 1e-8];
const PSD_TOLERANCE: f64 = 1e-8;

/// Factor a symmetric PSD matrix given as a row-major `n x n` slice.
pub fn factorize(a: &[f64], n: usize) -> Result<SymmetricFactor> {
    debug_assert_eq!(a.len(), n * n);
    let scale = trace_scale(a, n);
    if let Some(l) = try_cholesky(a, n, 0.0) {
        return Ok(SymmetricFactor {
            n,
            factor: l,
            lower_triangular: true,
            regularization: Regularization::None,
        });
    }
    for &rel in &JITTER_LADDER {
        let jitter = rel * scale;
        if let Some(l) = try_cholesky(a, n, jitter) {
            return Ok(SymmetricFactor {
                n,
                factor: l,
                lower_triangular: true,
                regularization: Regularization::Jitter(jitter),
            });
        }
    }
    // Eigen route: clip negatives at zero, or reject if genuinely
    // indefinite.
    let (mut eigvals, eigvecs) = jacobi_eigen(a, n);
    let min_eig = eigvals.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig < -PSD_TOLERANCE * scale {
        return Err(Error::NotPsd(min_eig));
    }
    for v in eigvals.iter_mut() {
        *v = v.max(0.0);
    }
    // F = Q diag(sqrt(lambda)); columns of Q scaled.
    let mut factor = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            factor[i * n + j] = eigvecs[i * n + j] * eigvals[j].sqrt();
        }
    }
    Ok(SymmetricFactor {
        n,
        factor,
        lower_triangular: false,
        regularization: Regularization::EigenClip { min_eigenvalue: min_eig },
    })
}

fn trace_scale(a: &[f64], n: usize) -> f64 {
    let tr: f64 = (0..n).map(|i| a[i * n + i].abs()).sum();
    (tr / n as f64).max(f64::MIN_POSITIVE)
}

/// Standard Cholesky; returns None on a non-positive pivot.
fn try_cholesky(a: &[f64], n: usize, jitter: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j] + if i == j { jitter } else { 0.0 };
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i * n + j] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Cyclic Jacobi eigendecomposition for symmetric matrices. Returns
/// (eigenvalues, eigenvectors as columns of a row-major matrix).
fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut b = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-14 * norm.max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += b[p * n + q] * b[p * n + q];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = b[p * n + q];
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = b[p * n + p];
                let aqq = b[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotate rows/columns p and q of B.
                for k in 0..n {
                    let bkp = b[k * n + p];
                    let bkq = b[k * n + q];
                    b[k * n + p] = c * bkp - s * bkq;
                    b[k * n + q] = s * bkp + c * bkq;
                }
                for k in 0..n {
                    let bpk = b[p * n + k];
                    let bqk = b[q * n + k];
                    b[p * n + k] = c * bpk - s * bqk;
                    b[q * n + k] = s * bpk + c * bqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eigvals = (0..n).map(|i| b[i * n + i]).collect();
    (eigvals, v)
}

impl SymmetricFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Draw one vector `F z` with `z` standard normal, into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut Vec<f64>, out: &mut [f64]) {
        let n = self.n;
        z.clear();
        z.extend((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        for (i, slot) in out.iter_mut().enumerate() {
            let cols = if self.lower_triangular { i + 1 } else { n };
            let row = &self.factor[i * n..i * n + cols];
            let mut acc = 0.0;
            for (f, zk) in row.iter().zip(z.iter()) {
                acc += f * zk;
            }
            *slot = acc;
        }
    }

    /// `F F^T` entry (i,j); used to validate factorizations.
    pub fn reconstruct(&self, i: usize, j: usize) -> f64 {
        let n = self.n;
        let cap = if self.lower_triangular { i.min(j) + 1 } else { n };
        (0..cap)
            .map(|k| self.factor[i * n + k] * self.factor[j * n + k])
            .sum()
    }

    /// Max absolute reconstruction error against the input matrix.
    pub fn reconstruction_error(&self, a: &[f64]) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.reconstruct(i, j) - a[i * n + j]).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn factors_positive_definite() {
        let a = vec![4.0, 2.0, 2.0, 3.0];
        let f = factorize(&a, 2).unwrap();
        assert_eq!(f.regularization, Regularization::None);
        assert!(f.reconstruction_error(&a) < 1e-12);
    }

    #[test]
    fn factors_singular_psd() {
        // Rank-1: (1,1) outer product.
        let a = vec![1.0, 1.0, 1.0, 1.0];
        let f = factorize(&a, 2).unwrap();
        assert!(f.reconstruction_error(&a) < 1e-7);
    }

    #[test]
    fn rejects_indefinite() {
        let a = [1.0, 0.0, 0.0, -1.0];
        assert!(matches!(factorize(&a, 2), Err(Error::NotPsd(_))));
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // diag(5, 1) conjugated by a rotation.
        let c = (0.3f64).cos();
        let s = (0.3f64).sin();
        let a = [
            5.0 * c * c + 1.0 * s * s,
            (5.0 - 1.0) * c * s,
            (5.0 - 1.0) * c * s,
            5.0 * s * s + 1.0 * c * c,
        ];
        let (mut vals, _) = jacobi_eigen(&a, 2);
        vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_covariance_matches() {
        let a = vec![2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0];
        let f = factorize(&a, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let m = 200_000;
        let mut acc = [0.0; 9];
        let mut z = Vec::new();
        let mut x = [0.0; 3];
        for _ in 0..m {
            f.sample_into(&mut rng, &mut z, &mut x);
            for i in 0..3 {
                for j in 0..3 {
                    acc[i * 3 + j] += x[i] * x[j];
                }
            }
        }
        for (i, (&sum, &target)) in acc.iter().zip(&a).enumerate() {
            let est = sum / m as f64;
            // 4 standard errors of a Gaussian second moment at this m.
            assert!((est - target).abs() < 4.0 * 3.0 / (m as f64).sqrt(), "entry {i}: {est}");
        }
    }
}
