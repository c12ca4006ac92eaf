//! Gaussian surrogates of the permutation process: the n-dependent
//! pre-limit process, limit kernels with a gridded sampler, the Kiefer
//! field, and the stochastic-integral representation of the limit.

pub mod factor;
pub mod kernel;
pub mod kiefer;

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::matrix::{Normalization, ScoreMatrix, SigmaMatrix};
use crate::path::StepPath;
use crate::Result;

pub use factor::{factorize, Regularization, SymmetricFactor};
pub use kernel::{uniform_grid, GridSampler, KernelSpec, LimitKernel};
pub use kiefer::{kiefer_cov, sample_kiefer, AlphaFamily, IntegralSampler, KieferField};

/// The pre-limit Gaussian surrogate `Z_n = sum_i W_i J_{i/n}`.
///
/// The exact construction realizes the `W_i` from `n^2` independent
/// standard normals `X_il` as `W_il = a(i,l)(X_il - colmean_l X) /
/// (s sqrt(n-1))`, `W_i = sum_l W_il`, which reproduces the covariance
/// matrix `sigma` of the permutation summands exactly in law.
#[derive(Debug, Clone)]
pub struct PreLimitModel {
    score: Arc<ScoreMatrix>,
    norm: Normalization,
    sigma: SigmaMatrix,
}

/// Reusable buffers for the exact sampler.
#[derive(Debug, Default, Clone)]
pub struct PrelimitScratch {
    column: Vec<f64>,
    w: Vec<f64>,
    w2: Vec<f64>,
}

impl PrelimitScratch {
    /// The increment vector written by the last
    /// [`PreLimitModel::sample_w`] call.
    pub fn w_slice(&self) -> &[f64] {
        &self.w
    }
}

impl PreLimitModel {
    pub fn new(score: Arc<ScoreMatrix>, norm: Normalization) -> Self {
        let sigma = score.sigma_matrix(&norm);
        Self { score, norm, sigma }
    }

    pub fn n(&self) -> usize {
        self.score.n()
    }

    pub fn score(&self) -> &ScoreMatrix {
        &self.score
    }

    pub fn norm(&self) -> &Normalization {
        &self.norm
    }

    pub fn sigma(&self) -> &SigmaMatrix {
        &self.sigma
    }

    /// Draw the increment vector `(W_1, ..., W_n)` by the exact `n^2`
    /// construction. The normals are consumed column by column.
    pub fn sample_w<'a, R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        scratch: &'a mut PrelimitScratch,
    ) -> &'a [f64] {
        let n = self.n();
        let inv = 1.0 / (self.norm.s * ((n - 1) as f64).sqrt());
        scratch.column.resize(n, 0.0);
        scratch.w.clear();
        scratch.w.resize(n, 0.0);
        for l in 0..n {
            let mut mean = 0.0;
            for x in scratch.column.iter_mut() {
                *x = rng.sample(StandardNormal);
                mean += *x;
            }
            mean /= n as f64;
            for i in 0..n {
                scratch.w[i] += self.score.a(i, l) * (scratch.column[i] - mean);
            }
        }
        for w in scratch.w.iter_mut() {
            *w *= inv;
        }
        &scratch.w
    }

    /// Draw `Z_n` as a step path.
    pub fn sample_path<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        scratch: &mut PrelimitScratch,
    ) -> StepPath {
        self.sample_w(rng, scratch);
        StepPath::from_increments(&scratch.w, 1.0)
    }

    /// Draw the split pair `(Z_n^(1), Z_n^(2))` with `Z_n = Z_n^(1) -
    /// Z_n^(2)`, from the same normals (consumed in the same order) as
    /// [`PreLimitModel::sample_path`] would use.
    ///
    /// `Z_n^(1)(t) = (s sqrt(n-1))^{-1} sum_{i <= nt} sum_l a(i,l) X_il`
    /// has independent increments with `Var Z_n^(1)(t) = n f_n(t)/(n-1)`;
    /// `Z_n^(2)` is the same sum over the column means.
    pub fn sample_split<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        scratch: &mut PrelimitScratch,
    ) -> (StepPath, StepPath) {
        let n = self.n();
        let inv = 1.0 / (self.norm.s * ((n - 1) as f64).sqrt());
        scratch.column.resize(n, 0.0);
        scratch.w.clear();
        scratch.w.resize(n, 0.0);
        scratch.w2.clear();
        scratch.w2.resize(n, 0.0);
        for l in 0..n {
            let mut mean = 0.0;
            for x in scratch.column.iter_mut() {
                *x = rng.sample(StandardNormal);
                mean += *x;
            }
            mean /= n as f64;
            for i in 0..n {
                let a = self.score.a(i, l);
                scratch.w[i] += a * scratch.column[i];
                scratch.w2[i] += a * mean;
            }
        }
        (
            StepPath::from_increments(&scratch.w, inv),
            StepPath::from_increments(&scratch.w2, inv),
        )
    }

    /// Factorized sampler: one `n x n` triangular product per draw
    /// instead of `n^2` normals. Identical in law to the exact route;
    /// the construction validates that the factor reproduces `sigma`.
    pub fn factorized(&self) -> Result<FactorizedPrelimit> {
        let n = self.n();
        let factor = factorize(self.sigma.as_slice(), n)?;
        Ok(FactorizedPrelimit { factor })
    }
}

/// Cached factor of `sigma` for bulk pre-limit sampling.
pub struct FactorizedPrelimit {
    factor: SymmetricFactor,
}

impl FactorizedPrelimit {
    pub fn factor(&self) -> &SymmetricFactor {
        &self.factor
    }

    pub fn sample_path<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        z: &mut Vec<f64>,
        w: &mut Vec<f64>,
    ) -> StepPath {
        w.resize(self.factor.n(), 0.0);
        self.factor.sample_into(rng, z, w);
        StepPath::from_increments(w, 1.0)
    }
}
