//! The Kiefer field and the two-dimensional stochastic-integral
//! representation of the limit process.
//!
//! The Brownian sheet `W` is simulated exactly at grid nodes by summing
//! independent `N(0, cell area)` increments; the Kiefer field is then
//! `K(v,w) = W(v,w) - v W(1,w)`, a Brownian bridge in `v` and a Brownian
//! motion in `w`, with covariance `(v1^v2 - v1 v2)(w1^w2)`. The limit
//! process of a matrix family with rescaled limit `alpha` is the
//! integral `Z(t) = ||alpha||_2^{-1} int_{[0,t] x [0,1]} alpha dK`,
//! discretized here with midpoint evaluation of `alpha` on cells.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::matrix::ScoreMatrix;
use crate::path::StepPath;
use crate::sum::Kahan;
use crate::{Error, Result};

/// One realization of the Kiefer field on a rectangular node grid.
#[derive(Debug, Clone)]
pub struct KieferField {
    grid_v: Vec<f64>,
    grid_w: Vec<f64>,
    /// Node values, row-major over (v index, w index).
    values: Vec<f64>,
}

/// Validate a monotone grid running from 0 to 1.
fn check_unit_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid[0] != 0.0 || *grid.last().unwrap() != 1.0 {
        return Err(Error::InvalidConfig(
            "grid must run from 0.0 to 1.0 with at least two nodes".into(),
        ));
    }
    for pair in grid.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidConfig("grid must strictly increase".into()));
        }
    }
    Ok(())
}

/// Simulate the Kiefer field at the nodes of `grid_v x grid_w`.
pub fn sample_kiefer<R: Rng + ?Sized>(
    grid_v: &[f64],
    grid_w: &[f64],
    rng: &mut R,
) -> Result<KieferField> {
    check_unit_grid(grid_v)?;
    check_unit_grid(grid_w)?;
    let nv = grid_v.len();
    let nw = grid_w.len();
    // Brownian sheet at nodes by 2-D prefix sums of cell increments.
    let mut w = vec![0.0; nv * nw];
    for i in 1..nv {
        let dv = grid_v[i] - grid_v[i - 1];
        for j in 1..nw {
            let dw = grid_w[j] - grid_w[j - 1];
            let z: f64 = rng.sample(StandardNormal);
            let inc = z * (dv * dw).sqrt();
            w[i * nw + j] = inc + w[(i - 1) * nw + j] + w[i * nw + j - 1]
                - w[(i - 1) * nw + j - 1];
        }
    }
    // K(v,w) = W(v,w) - v W(1,w).
    let mut values = vec![0.0; nv * nw];
    for i in 0..nv {
        let v = grid_v[i];
        for j in 0..nw {
            values[i * nw + j] = w[i * nw + j] - v * w[(nv - 1) * nw + j];
        }
    }
    Ok(KieferField { grid_v: grid_v.to_vec(), grid_w: grid_w.to_vec(), values })
}

impl KieferField {
    pub fn grid_v(&self) -> &[f64] {
        &self.grid_v
    }

    pub fn grid_w(&self) -> &[f64] {
        &self.grid_w
    }

    /// Value at node `(i, j)`.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid_w.len() + j]
    }
}

/// Target covariance `(v1^v2 - v1 v2)(w1^w2)` of the Kiefer field.
pub fn kiefer_cov(v1: f64, w1: f64, v2: f64, w2: f64) -> f64 {
    (v1.min(v2) - v1 * v2) * w1.min(w2)
}

/// A rescaled-matrix limit `alpha` with its norms.
#[derive(Clone)]
pub struct AlphaFamily {
    alpha: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    l2_norm: f64,
    sup_norm: f64,
    /// True when `alpha` jumps across the line `v = w`; integral
    /// discretizations then split the crossed cells instead of using
    /// the midpoint value.
    diagonal_jump: bool,
}

impl std::fmt::Debug for AlphaFamily {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(fm, "AlphaFamily(l2={}, sup={})", self.l2_norm, self.sup_norm)
    }
}

impl AlphaFamily {
    /// Wrap a bounded limit function with known norms; rejects a zero L2
    /// norm.
    pub fn new(
        alpha: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        l2_norm: f64,
        sup_norm: f64,
    ) -> Result<Self> {
        if !l2_norm.is_finite() || l2_norm <= 0.0 {
            return Err(Error::ZeroAlpha);
        }
        Ok(Self { alpha: Arc::new(alpha), l2_norm, sup_norm, diagonal_jump: false })
    }

    /// Mark `alpha` as jumping across `v = w`.
    pub fn with_diagonal_jump(mut self) -> Self {
        self.diagonal_jump = true;
        self
    }

    /// The exceedance-family limit `alpha(v,w) = 1{v <= w} - 1 + v`,
    /// with `||alpha||_2^2 = 1/6` and `||alpha||_inf = 1`.
    pub fn tableau() -> Self {
        Self {
            alpha: Arc::new(crate::tableaux::alpha),
            l2_norm: (1.0f64 / 6.0).sqrt(),
            sup_norm: 1.0,
            diagonal_jump: true,
        }
    }

    /// `alpha == 1`: the limit process is a Brownian bridge.
    pub fn constant_one() -> Self {
        Self { alpha: Arc::new(|_, _| 1.0), l2_norm: 1.0, sup_norm: 1.0, diagonal_jump: false }
    }

    pub fn has_diagonal_jump(&self) -> bool {
        self.diagonal_jump
    }

    #[inline]
    pub fn alpha(&self, v: f64, w: f64) -> f64 {
        (self.alpha)(v, w)
    }

    /// `sigma_a = ||alpha||_2`.
    pub fn sigma_a(&self) -> f64 {
        self.l2_norm
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// `alpha_plus = ||alpha||_inf / ||alpha||_2`.
    pub fn alpha_plus(&self) -> f64 {
        self.sup_norm / self.l2_norm
    }

    /// The step function induced by a score matrix:
    /// `alpha_n(v, w) = a(ceil(nv), ceil(nw))` on `(0,1]^2`.
    pub fn alpha_n(matrix: &ScoreMatrix, v: f64, w: f64) -> f64 {
        let n = matrix.n();
        let i = ((v * n as f64).ceil() as usize).clamp(1, n);
        let j = ((w * n as f64).ceil() as usize).clamp(1, n);
        matrix.a(i - 1, j - 1)
    }

    /// `||eps_tilde_n||_2` for the fully scaled difference
    /// `eps_tilde_n = n (s sqrt(n-1))^{-1} alpha_n - ||alpha||_2^{-1} alpha`,
    /// the integrand comparing the pre-limit stochastic integral with
    /// the limit one; satisfies `||eps_tilde_n||_2 <= 2 ||eps_n||_2`
    /// when `s` is canonical.
    pub fn eps_tilde_n_l2(&self, matrix: &ScoreMatrix, s: f64) -> f64 {
        let n = matrix.n() as f64;
        let scale_n = n / (s * (n - 1.0).sqrt());
        let scale = 1.0 / self.l2_norm;
        self.cellwise_l2(matrix, |an, a| scale_n * an - scale * a)
    }

    /// `||eps_n||_2 = ||alpha||_2^{-1} ||alpha_n - alpha||_2`, by 3x3
    /// Gauss-Legendre quadrature on each cell of the n x n grid.
    pub fn eps_n_l2(&self, matrix: &ScoreMatrix) -> f64 {
        let scale = 1.0 / self.l2_norm;
        self.cellwise_l2(matrix, |an, a| scale * (an - a))
    }

    /// L2 norm of `combine(alpha_n(v,w), alpha(v,w))` over the unit
    /// square, by per-cell Gauss-Legendre quadrature.
    fn cellwise_l2(&self, matrix: &ScoreMatrix, combine: impl Fn(f64, f64) -> f64) -> f64 {
        // Nodes and weights for 3-point Gauss-Legendre on [0,1].
        let offset = 0.5 * (0.6f64).sqrt();
        let nodes = [0.5 - offset, 0.5, 0.5 + offset];
        let weights = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
        let n = matrix.n();
        let h = 1.0 / n as f64;
        let mut total = Kahan::new();
        for i in 0..n {
            for j in 0..n {
                let anij = matrix.a(i, j);
                let mut cell = 0.0;
                for (nv, wv) in nodes.iter().zip(weights) {
                    let v = (i as f64 + nv) * h;
                    for (nw, ww) in nodes.iter().zip(weights) {
                        let w = (j as f64 + nw) * h;
                        let d = combine(anij, self.alpha(v, w));
                        cell += wv * ww * d * d;
                    }
                }
                total.add(cell * h * h);
            }
        }
        total.total().sqrt()
    }
}

/// Discretized stochastic-integral sampler for
/// `Z(t) = sigma_a^{-1} int_{[0,t] x [0,1]} alpha dK`.
///
/// Cells are `(m * refine_v) x cells_w` uniform, with `alpha` taken at
/// cell midpoints; Kiefer increments come from sheet increments as
/// `dK = dW - (cell area / strip width) * (w-strip sum of dW)`. When
/// the family declares a jump across `v = w`, each crossed cell is
/// split along the diagonal into two pieces carrying their own sheet
/// increments and side-averaged `alpha` values; midpoint evaluation of
/// a jump inside a cell would otherwise leave an `O(1/cells)` bias that
/// dominates near `t = 0`. Output-path times `k/m` land on cell
/// boundaries by construction.
pub struct IntegralSampler {
    out_steps: usize,
    cells_w: usize,
    strips: Vec<StripSpec>,
    inv_sigma_a: f64,
    max_pieces: usize,
}

/// One w-strip's integration pieces, in v order.
struct StripSpec {
    values: Vec<f64>,
    /// sqrt(piece area), the increment standard deviation.
    sds: Vec<f64>,
    /// piece area / strip width, the bridge-correction weight.
    weights: Vec<f64>,
    /// Piece offset of each output cut `k = 0..=m`.
    cuts: Vec<usize>,
}

impl IntegralSampler {
    pub fn new(family: &AlphaFamily, out_steps: usize, refine_v: usize, cells_w: usize) -> Result<Self> {
        if out_steps == 0 || refine_v == 0 || cells_w == 0 {
            return Err(Error::InvalidConfig(
                "integral sampler needs positive grid parameters".into(),
            ));
        }
        let cells_v = out_steps * refine_v;
        let hv = 1.0 / cells_v as f64;
        let hw = 1.0 / cells_w as f64;
        let mut strips = Vec::with_capacity(cells_w);
        for j in 0..cells_w {
            let (w0, w1) = (j as f64 * hw, (j + 1) as f64 * hw);
            let mut spec = StripSpec {
                values: Vec::with_capacity(cells_v + 2),
                sds: Vec::new(),
                weights: Vec::new(),
                cuts: Vec::with_capacity(out_steps + 1),
            };
            spec.cuts.push(0);
            for i in 0..cells_v {
                let (v0, v1) = (i as f64 * hv, (i + 1) as f64 * hv);
                let crossed = family.has_diagonal_jump() && v1 > w0 && v0 < w1;
                if crossed {
                    for (value, area) in split_cell(family, v0, v1, w0, w1) {
                        spec.values.push(value);
                        spec.sds.push(area.sqrt());
                        spec.weights.push(area / hw);
                    }
                } else {
                    let area = hv * hw;
                    spec.values.push(family.alpha(0.5 * (v0 + v1), 0.5 * (w0 + w1)));
                    spec.sds.push(area.sqrt());
                    spec.weights.push(hv);
                }
                if (i + 1) % refine_v == 0 {
                    spec.cuts.push(spec.values.len());
                }
            }
            strips.push(spec);
        }
        let max_pieces = strips.iter().map(|s| s.values.len()).max().unwrap_or(0);
        Ok(Self {
            out_steps,
            cells_w,
            strips,
            inv_sigma_a: 1.0 / family.sigma_a(),
            max_pieces,
        })
    }

    pub fn out_steps(&self) -> usize {
        self.out_steps
    }

    /// Draw one path on the uniform `out_steps` grid.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, scratch: &mut Vec<f64>) -> StepPath {
        let mut out = vec![0.0; self.out_steps + 1];
        scratch.resize(self.max_pieces, 0.0);
        for strip in &self.strips {
            let pieces = strip.values.len();
            let mut strip_sum = 0.0;
            for (slot, sd) in scratch[..pieces].iter_mut().zip(&strip.sds) {
                let z: f64 = rng.sample(StandardNormal);
                *slot = z * sd;
                strip_sum += *slot;
            }
            let mut running = 0.0;
            for (slot, cut) in out.iter_mut().skip(1).zip(strip.cuts.windows(2)) {
                let span = cut[0]..cut[1];
                for ((value, dw), weight) in strip.values[span.clone()]
                    .iter()
                    .zip(&scratch[span.clone()])
                    .zip(&strip.weights[span])
                {
                    running += value * (dw - weight * strip_sum);
                }
                *slot += running;
            }
        }
        for v in out.iter_mut() {
            *v *= self.inv_sigma_a;
        }
        StepPath::from_values(out).expect("nonempty grid")
    }

    /// Exact covariance of the discretized sampler at output nodes
    /// `k1/m`, `k2/m`; quantifies the discretization bias against the
    /// closed-form kernel.
    pub fn exact_covariance(&self, k1: usize, k2: usize) -> f64 {
        let hw = 1.0 / self.cells_w as f64;
        let mut total = Kahan::new();
        for strip in &self.strips {
            let (c1, c2) = (strip.cuts[k1], strip.cuts[k2]);
            let mut sq = 0.0;
            for p in 0..c1.min(c2) {
                let area = strip.sds[p] * strip.sds[p];
                sq += strip.values[p] * strip.values[p] * area;
            }
            let moment = |c: usize| -> f64 {
                (0..c).map(|p| strip.values[p] * strip.sds[p] * strip.sds[p]).sum()
            };
            total.add(sq - moment(c1) * moment(c2) / hw);
        }
        total.total() * self.inv_sigma_a * self.inv_sigma_a
    }
}

/// Split a cell crossed by the `v = w` jump into the two one-sided
/// pieces, returning `(side-averaged alpha, piece area)` for each.
/// Averages come from a micro-grid of midpoints, which is exact for
/// families that are affine on each side of the diagonal.
fn split_cell(family: &AlphaFamily, v0: f64, v1: f64, w0: f64, w1: f64) -> Vec<(f64, f64)> {
    const MICRO: usize = 32;
    let dv = (v1 - v0) / MICRO as f64;
    let dw = (w1 - w0) / MICRO as f64;
    let micro_area = dv * dw;
    let mut acc = [(0.0f64, 0usize); 2]; // (value sum, count) per side
    for a in 0..MICRO {
        let v = v0 + (a as f64 + 0.5) * dv;
        for b in 0..MICRO {
            let w = w0 + (b as f64 + 0.5) * dw;
            let side = usize::from(v > w);
            acc[side].0 += family.alpha(v, w);
            acc[side].1 += 1;
        }
    }
    acc.iter()
        .filter(|(_, count)| *count > 0)
        .map(|&(sum, count)| (sum / count as f64, count as f64 * micro_area))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::kernel::{uniform_grid, LimitKernel};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kiefer_is_a_bridge_in_v() {
        let grid = uniform_grid(16);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let k = sample_kiefer(&grid, &grid, &mut rng).unwrap();
            for j in 0..=16 {
                assert_eq!(k.value(0, j), 0.0);
                assert!(k.value(16, j).abs() < 1e-12);
            }
            for i in 0..=16 {
                assert_eq!(k.value(i, 0), 0.0);
            }
        }
    }

    #[test]
    fn kiefer_variance_at_probe() {
        // Var K(1/2, 1) = 1/4.
        let grid = uniform_grid(8);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = 100_000;
        let mut sum_sq = 0.0;
        for _ in 0..m {
            let k = sample_kiefer(&grid, &grid, &mut rng).unwrap();
            let x = k.value(4, 8);
            sum_sq += x * x;
        }
        let var = sum_sq / m as f64;
        let se = 0.25 * (2.0 / m as f64).sqrt();
        assert!((var - 0.25).abs() < 4.0 * se, "var {var}");
        assert_abs_diff_eq!(kiefer_cov(0.5, 1.0, 0.5, 1.0), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_kiefer(&[0.0, 0.5], &[0.0, 1.0], &mut rng).is_err());
        assert!(sample_kiefer(&[0.0, 0.6, 0.5, 1.0], &[0.0, 1.0], &mut rng).is_err());
    }

    #[test]
    fn alpha_family_norms() {
        let fam = AlphaFamily::tableau();
        assert_abs_diff_eq!(fam.sigma_a() * fam.sigma_a(), 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fam.alpha_plus(), 6.0f64.sqrt(), epsilon = 1e-12);
        assert!(matches!(AlphaFamily::new(|_, _| 0.0, 0.0, 0.0), Err(Error::ZeroAlpha)));
    }

    #[test]
    fn alpha_n_matches_matrix_cells() {
        let m = crate::tableaux::exceedance_matrix(10).unwrap();
        // v in ((i-1)/n, i/n] picks row i.
        assert_eq!(AlphaFamily::alpha_n(&m, 0.05, 0.55), m.a(0, 5));
        assert_eq!(AlphaFamily::alpha_n(&m, 0.1, 0.55), m.a(0, 5));
        assert_eq!(AlphaFamily::alpha_n(&m, 0.11, 0.55), m.a(1, 5));
    }

    #[test]
    fn eps_n_shrinks_with_n() {
        let fam = AlphaFamily::tableau();
        let e50 = fam.eps_n_l2(&crate::tableaux::exceedance_matrix(50).unwrap());
        let e200 = fam.eps_n_l2(&crate::tableaux::exceedance_matrix(200).unwrap());
        // The family satisfies ||eps_n||_2^2 <= 18/n.
        assert!(e50 * e50 <= 18.0 / 50.0, "{e50}");
        assert!(e200 * e200 <= 18.0 / 200.0, "{e200}");
        assert!(e200 < e50);
    }

    #[test]
    fn eps_tilde_bounded_by_twice_eps() {
        use crate::matrix::NormalizationMode;
        let fam = AlphaFamily::tableau();
        for n in [50usize, 200] {
            let m = crate::tableaux::exceedance_matrix(n).unwrap();
            let s = m.normalization(NormalizationMode::Canonical).unwrap().s;
            let tilde = fam.eps_tilde_n_l2(&m, s);
            let plain = fam.eps_n_l2(&m);
            assert!(tilde <= 2.0 * plain + 1e-12, "n={n}: {tilde} vs 2x{plain}");
            assert!(tilde > 0.0);
        }
    }

    #[test]
    fn integral_sampler_discrete_covariance_tracks_kernel() {
        // With the diagonal cells split along the jump, the remaining
        // bias is ~1e-4 at 128 cells and halves with each refinement.
        let fam = AlphaFamily::tableau();
        let kernel = LimitKernel::tableau();
        let bias = |cells: usize| {
            let sampler = IntegralSampler::new(&fam, 8, cells / 8, cells).unwrap();
            let mut worst = 0.0f64;
            for k1 in 0..=8 {
                for k2 in k1..=8 {
                    let exact = sampler.exact_covariance(k1, k2);
                    let target = kernel.sigma(k1 as f64 / 8.0, k2 as f64 / 8.0).unwrap();
                    worst = worst.max((exact - target).abs());
                }
            }
            worst
        };
        let b128 = bias(128);
        let b256 = bias(256);
        assert!(b128 < 3e-4, "{b128}");
        assert!(b256 < 1.5e-4, "{b256}");
        assert!(b256 < b128);
    }

    #[test]
    fn constant_alpha_gives_bridge_covariance() {
        let fam = AlphaFamily::constant_one();
        let sampler = IntegralSampler::new(&fam, 4, 8, 32).unwrap();
        // For constant alpha the discretization is exact: t^u - tu.
        for k1 in 0..=4 {
            for k2 in 0..=4 {
                let t = k1 as f64 / 4.0;
                let u = k2 as f64 / 4.0;
                assert_abs_diff_eq!(
                    sampler.exact_covariance(k1, k2),
                    t.min(u) - t * u,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn integral_sampler_paths_start_at_zero() {
        let fam = AlphaFamily::tableau();
        let sampler = IntegralSampler::new(&fam, 8, 4, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut scratch = Vec::new();
        for _ in 0..10 {
            let p = sampler.sample(&mut rng, &mut scratch);
            assert_eq!(p.eval(0.0), 0.0);
            assert_eq!(p.n(), 8);
        }
    }
}
