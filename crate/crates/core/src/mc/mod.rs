//! Reproducible Monte Carlo and exact-enumeration engine.
//!
//! Ensembles are embarrassingly parallel over sample indices: sample `i`
//! always consumes substream `i` of the seed, chunks of samples are
//! accumulated independently, and chunk accumulators merge in index
//! order. The output is therefore bit-identical for any worker count.

pub mod ks;
pub mod rng;
pub mod stats;

use std::sync::Arc;

use rayon::prelude::*;

use crate::functionals::PathFunctional;
use crate::gaussian::{FactorizedPrelimit, GridSampler, IntegralSampler, PreLimitModel, PrelimitScratch};
use crate::matrix::{Normalization, ScoreMatrix};
use crate::path::StepPath;
use crate::perm::Permutation;
use crate::tableaux::ExceedanceRecord;
use crate::{Error, Result};

pub use crate::perm::{enumerate as enumerate_permutations, factorial};
pub use ks::{kolmogorov_q, ks_normal, normal_cdf, KsTest};
pub use rng::{random_permutation, substream, RNG_NAME};
pub use stats::{VectorStats, Welford};

/// Samples per work chunk. Fixed so that the chunk structure, and hence
/// the merge order and the floating-point result, do not depend on the
/// worker count.
const CHUNK: u64 = 1024;

/// Configuration of one ensemble run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Grid resolution of the underlying process.
    pub n: usize,
    /// Number of Monte Carlo samples.
    pub samples: u64,
    /// Root seed; sample `i` uses substream `i`.
    pub seed: u64,
    /// Worker threads; 0 means the `PERMCLT_WORKERS` environment
    /// variable, defaulting to the available parallelism.
    pub workers: usize,
    /// Evaluation times in `[0,1]`, sorted.
    pub grid: Vec<f64>,
    /// Functionals evaluated on every sampled path.
    pub functionals: Vec<PathFunctional>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidConfig("samples must be >= 1".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidConfig("grid must be nonempty".into()));
        }
        for pair in self.grid.windows(2) {
            if pair[1] < pair[0] {
                return Err(Error::InvalidConfig("grid times must be sorted".into()));
            }
        }
        for &t in &self.grid {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::RangeError(t));
            }
        }
        Ok(())
    }

    /// Resolve the effective worker count.
    pub fn effective_workers(&self) -> usize {
        if self.workers > 0 {
            return self.workers;
        }
        if let Ok(v) = std::env::var("PERMCLT_WORKERS") {
            if let Ok(k) = v.parse::<usize>() {
                if k > 0 {
                    return k;
                }
            }
        }
        std::thread::available_parallelism().map(|v| v.get()).unwrap_or(1)
    }
}

/// Where sampled paths come from.
#[derive(Clone)]
pub enum PathSource {
    /// `Y(pi)` for a uniform random permutation.
    Permutation { matrix: Arc<ScoreMatrix>, norm: Normalization },
    /// Pre-limit surrogate `Z_n`, exact `n^2`-normal construction.
    PreLimitExact { model: Arc<PreLimitModel> },
    /// Pre-limit surrogate `Z_n` through the cached covariance factor;
    /// identical in law, one triangular product per draw.
    PreLimitFactorized { factor: Arc<FactorizedPrelimit> },
    /// Limit process on a fixed grid via its covariance factorization.
    LimitGrid { sampler: Arc<GridSampler> },
    /// Limit process as a discretized stochastic integral against the
    /// Kiefer field.
    LimitIntegral { sampler: Arc<IntegralSampler> },
    /// Normalized exceedance process `Yhat_n` of a uniform permutation.
    TableauYhat { n: usize },
}

/// Per-worker reusable buffers.
#[derive(Default)]
pub struct SourceScratch {
    perm: Vec<usize>,
    values: Vec<f64>,
    prelimit: PrelimitScratch,
    z: Vec<f64>,
    w: Vec<f64>,
}

impl PathSource {
    /// Human-readable label recorded in result documents.
    pub fn label(&self) -> &'static str {
        match self {
            PathSource::Permutation { .. } => "y",
            PathSource::PreLimitExact { .. } => "prelimit",
            PathSource::PreLimitFactorized { .. } => "prelimit-factorized",
            PathSource::LimitGrid { .. } => "limit",
            PathSource::LimitIntegral { .. } => "limit-integral",
            PathSource::TableauYhat { .. } => "tableau-yhat",
        }
    }

    /// Draw one path from the given stream.
    pub fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R, scratch: &mut SourceScratch) -> StepPath {
        match self {
            PathSource::Permutation { matrix, norm } => {
                Permutation::random_into(&mut scratch.perm, matrix.n(), rng);
                matrix.fill_path_values(norm, &scratch.perm, &mut scratch.values);
                StepPath::from_values(scratch.values.clone()).expect("n+1 values")
            }
            PathSource::PreLimitExact { model } => model.sample_path(rng, &mut scratch.prelimit),
            PathSource::PreLimitFactorized { factor } => {
                factor.sample_path(rng, &mut scratch.z, &mut scratch.w)
            }
            PathSource::LimitGrid { sampler } => sampler.sample_path(rng),
            PathSource::LimitIntegral { sampler } => sampler.sample(rng, &mut scratch.values),
            PathSource::TableauYhat { n } => {
                Permutation::random_into(&mut scratch.perm, *n, rng);
                let pi = Permutation::new(scratch.perm.clone()).expect("fisher-yates output");
                ExceedanceRecord::from_permutation(&pi).y_hat().clone()
            }
        }
    }
}

/// Streaming ensemble statistics: grid-point moments with pairwise
/// covariances, plus one scalar accumulator per functional.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    grid: Vec<f64>,
    labels: Vec<String>,
    points: VectorStats,
    functionals: Vec<Welford>,
}

impl EnsembleStats {
    pub fn new(grid: Vec<f64>, labels: Vec<String>) -> Self {
        let dim = grid.len();
        let k = labels.len();
        Self { grid, labels, points: VectorStats::new(dim), functionals: vec![Welford::new(); k] }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn count(&self) -> u64 {
        self.points.count()
    }

    fn update(&mut self, point_values: &[f64], functional_values: &[f64]) {
        self.points.update(point_values);
        for (acc, &v) in self.functionals.iter_mut().zip(functional_values) {
            acc.update(v);
        }
    }

    pub fn merge(&mut self, other: &EnsembleStats) {
        assert_eq!(self.grid, other.grid, "cannot merge ensembles on different grids");
        self.points.merge(&other.points);
        for (a, b) in self.functionals.iter_mut().zip(&other.functionals) {
            a.merge(b);
        }
    }

    pub fn points(&self) -> &VectorStats {
        &self.points
    }

    pub fn functional_labels(&self) -> &[String] {
        &self.labels
    }

    pub fn functional(&self, label: &str) -> Option<&Welford> {
        self.labels.iter().position(|l| l == label).map(|i| &self.functionals[i])
    }

    pub fn functionals(&self) -> impl Iterator<Item = (&str, &Welford)> {
        self.labels.iter().map(|s| s.as_str()).zip(self.functionals.iter())
    }
}

/// Run an ensemble: draw `cfg.samples` paths from `source`, evaluate
/// them at the grid times and under the functionals, and return merged
/// streaming statistics. Deterministic in `(seed, config)` for any
/// worker count.
pub fn run_ensemble(cfg: &RunConfig, source: &PathSource) -> Result<EnsembleStats> {
    cfg.validate()?;
    let labels: Vec<String> = cfg.functionals.iter().map(|f| f.label()).collect();
    let chunk_count = cfg.samples.div_ceil(CHUNK);
    let ranges: Vec<(u64, u64)> = (0..chunk_count)
        .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(cfg.samples)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.effective_workers())
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let partials: Result<Vec<EnsembleStats>> = pool.install(|| {
        ranges
            .par_iter()
            .map(|&(start, end)| {
                let mut stats = EnsembleStats::new(cfg.grid.clone(), labels.clone());
                let mut scratch = SourceScratch::default();
                let mut point_buf = vec![0.0; cfg.grid.len()];
                let mut fun_buf = vec![0.0; cfg.functionals.len()];
                for i in start..end {
                    let mut rng = substream(cfg.seed, i);
                    let path = source.draw(&mut rng, &mut scratch);
                    for (slot, &t) in point_buf.iter_mut().zip(&cfg.grid) {
                        *slot = path.eval(t);
                    }
                    for (slot, f) in fun_buf.iter_mut().zip(&cfg.functionals) {
                        *slot = f.eval(&path)?;
                    }
                    stats.update(&point_buf, &fun_buf);
                }
                Ok(stats)
            })
            .collect()
    });
    let partials = partials?;
    let mut merged = EnsembleStats::new(cfg.grid.clone(), labels);
    for part in &partials {
        merged.merge(part);
    }
    Ok(merged)
}

/// A smooth-functional distance estimate between two path laws.
#[derive(Debug, Clone, Copy)]
pub struct DistanceEstimate {
    pub mean_a: f64,
    pub mean_b: f64,
    /// `|E g(A) - E g(B)|` estimate.
    pub delta: f64,
    /// Pooled standard error of the difference.
    pub se: f64,
    /// 95% confidence interval for the signed difference.
    pub ci95: (f64, f64),
    pub samples: u64,
}

/// Estimate `|E g(A) - E g(B)|` for the functional labeled `label` in
/// `cfg.functionals`. Both ensembles run with the same seed, so a
/// source compared against itself gives exactly zero.
pub fn distance_estimate(
    cfg: &RunConfig,
    label: &str,
    source_a: &PathSource,
    source_b: &PathSource,
) -> Result<DistanceEstimate> {
    let stats_a = run_ensemble(cfg, source_a)?;
    let stats_b = run_ensemble(cfg, source_b)?;
    let a = stats_a
        .functional(label)
        .ok_or_else(|| Error::InvalidConfig(format!("no functional labeled '{label}'")))?;
    let b = stats_b.functional(label).expect("same config");
    let delta_signed = a.mean() - b.mean();
    let var_a = a.variance().unwrap_or(0.0);
    let var_b = b.variance().unwrap_or(0.0);
    let se = (var_a / a.count() as f64 + var_b / b.count() as f64).sqrt();
    Ok(DistanceEstimate {
        mean_a: a.mean(),
        mean_b: b.mean(),
        delta: delta_signed.abs(),
        se,
        ci95: (delta_signed - 1.96 * se, delta_signed + 1.96 * se),
        samples: cfg.samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::NormalizationMode;
    use approx::assert_abs_diff_eq;

    fn y_source(n: usize, seed: u64) -> PathSource {
        let m = crate::family::MatrixFamily::Uniform { n, seed }.build().unwrap();
        let norm = m.normalization(NormalizationMode::Canonical).unwrap();
        PathSource::Permutation { matrix: Arc::new(m), norm }
    }

    fn base_cfg(samples: u64, seed: u64, workers: usize) -> RunConfig {
        RunConfig {
            n: 10,
            samples,
            seed,
            workers,
            grid: vec![0.25, 0.5, 1.0],
            functionals: vec![
                PathFunctional::parse("eval:t=0.5").unwrap(),
                PathFunctional::Integral,
            ],
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = base_cfg(0, 1, 1);
        assert!(cfg.validate().is_err());
        cfg.samples = 10;
        cfg.grid = vec![0.5, 0.25];
        assert!(cfg.validate().is_err());
        cfg.grid = vec![0.25, 1.5];
        assert!(matches!(cfg.validate(), Err(Error::RangeError(_))));
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let source = y_source(10, 3);
        let one = run_ensemble(&base_cfg(5000, 11, 1), &source).unwrap();
        let four = run_ensemble(&base_cfg(5000, 11, 4), &source).unwrap();
        for j in 0..3 {
            assert_eq!(one.points().mean(j), four.points().mean(j));
            assert_eq!(one.points().variance(j), four.points().variance(j));
            for k in 0..3 {
                assert_eq!(
                    one.points().covariance(j, k),
                    four.points().covariance(j, k)
                );
            }
        }
        for ((la, wa), (lb, wb)) in one.functionals().zip(four.functionals()) {
            assert_eq!(la, lb);
            assert_eq!(wa.mean(), wb.mean());
            assert_eq!(wa.variance(), wb.variance());
        }
    }

    #[test]
    fn reruns_are_bit_identical() {
        let source = y_source(8, 5);
        let a = run_ensemble(&base_cfg(3000, 21, 2), &source).unwrap();
        let b = run_ensemble(&base_cfg(3000, 21, 2), &source).unwrap();
        assert_eq!(a.points().mean(0), b.points().mean(0));
        assert_eq!(a.points().covariance(0, 2), b.points().covariance(0, 2));
    }

    #[test]
    fn single_sample_reports_insufficient_variance() {
        let source = y_source(6, 2);
        let stats = run_ensemble(&base_cfg(1, 9, 1), &source).unwrap();
        assert_eq!(stats.count(), 1);
        assert!(stats.points().variance(0).is_none());
        assert!(stats.functional("integral").unwrap().variance().is_none());
    }

    #[test]
    fn distance_of_source_to_itself_is_zero() {
        // Both ensembles consume identical substreams, so the estimate
        // is exactly zero; the pooled SE stays positive because it is
        // computed as if the ensembles were independent.
        let source = y_source(8, 4);
        let cfg = base_cfg(2000, 33, 2);
        let d = distance_estimate(&cfg, "integral", &source, &source).unwrap();
        assert_eq!(d.delta, 0.0);
        assert_eq!(d.mean_a, d.mean_b);
        assert!(d.se > 0.0);
    }

    #[test]
    fn y_ensemble_variance_matches_enumeration() {
        // Exact Var Y(1) over all permutations vs the MC estimate,
        // within 4 SE. Uses the tilde normalization so Var Y(1) = 1.
        let m = crate::family::MatrixFamily::Uniform { n: 5, seed: 8 }.build().unwrap();
        let norm = m.normalization(NormalizationMode::Tilde).unwrap();
        let mut exact = Welford::new();
        for pi in enumerate_permutations(5).unwrap() {
            let y = m.build_path(&norm, &pi).unwrap();
            exact.update(y.eval(1.0));
        }
        // Population variance over the 120 permutations.
        let pop_var = exact.variance().unwrap() * 119.0 / 120.0;
        assert_abs_diff_eq!(pop_var, 1.0, epsilon = 1e-10);

        let source = PathSource::Permutation { matrix: Arc::new(m), norm };
        let cfg = RunConfig {
            n: 5,
            samples: 40_000,
            seed: 17,
            workers: 2,
            grid: vec![1.0],
            functionals: vec![],
        };
        let stats = run_ensemble(&cfg, &source).unwrap();
        let est = stats.points().variance(0).unwrap();
        let se = est * (2.0f64 / cfg.samples as f64).sqrt();
        assert!((est - 1.0).abs() <= 4.0 * se, "est {est}");
    }
}
