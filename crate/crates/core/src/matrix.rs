//! Score matrices: centering, normalization, covariance structure, and the
//! random step path they induce.
//!
//! A raw score matrix `a0` is centered row by row, `a(i,j) = a0(i,j) -
//! mean_j a0(i,.)`, so that each summand `a(i, pi(i))` of the partial-sum
//! process has zero mean under a uniform random permutation `pi`. The
//! kept quantities are the normalization `s(a)`, the Lyapounov ratio
//! `L(a) = (n s^3)^{-1} sum |a|^3` driving the Gaussian approximation
//! error, and the covariance matrix `sigma` shared by the permutation
//! process and its Gaussian surrogate.

use crate::path::{grid_index, StepPath};
use crate::perm::Permutation;
use crate::sum::{csum, Kahan};
use crate::{Error, Result};

/// An `n x n` score matrix together with its row-centered form.
#[derive(Debug, Clone)]
pub struct ScoreMatrix {
    n: usize,
    /// Raw scores, row-major.
    a0: Vec<f64>,
    /// Row-centered scores `a(i,j) = a0(i,j) - row_means[i]`, row-major.
    a: Vec<f64>,
    /// Row means of `a0`.
    row_means: Vec<f64>,
    /// Column means of the centered matrix `a`.
    col_means: Vec<f64>,
    /// Grand mean of `a0`.
    grand_mean: f64,
    /// Largest absolute raw score; the reference scale for detecting
    /// centered matrices that are zero up to roundoff.
    a0_scale: f64,
}

/// How the scale factor `s` was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationMode {
    /// `s^2 = (n-1)^{-1} sum a(i,j)^2` over the row-centered matrix.
    Canonical,
    /// `s^2 = (n-1)^{-1} sum atilde(i,j)^2` over the doubly centered
    /// matrix; makes `Var Y(1) = 1` but can vanish on non-degenerate
    /// inputs (e.g. `a0(i,j) = b(i) + c(j)`).
    Tilde,
    /// Caller-supplied positive factor.
    Custom,
}

/// A positive normalization factor with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub mode: NormalizationMode,
    pub s: f64,
}

/// Covariance matrix `sigma[i][j] = Cov(W_i, W_j)` of the Gaussian
/// surrogate; identical to the covariances of the permutation summands
/// after the `s^2` rescaling. Symmetric and positive semidefinite; row
/// sums equal `((n-1) s^2)^{-1} sum_l a(i,l) (a(i,l) - colsum_l / n)`,
/// which vanishes only for special score structures.
#[derive(Debug, Clone)]
pub struct SigmaMatrix {
    n: usize,
    sigma: Vec<f64>,
}

/// `f_n` and `g_n` evaluated on a grid of times.
///
/// `f[k] = f_n(times[k])` and `g[k * len + m] = g_n(times[k], times[m])`.
#[derive(Debug, Clone)]
pub struct FnGnGrid {
    pub times: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl ScoreMatrix {
    /// Center the rows of a raw score matrix.
    ///
    /// Rejects `n < 2`, ragged input, and non-finite entries. Every row of
    /// the centered matrix sums to zero up to accumulation error.
    pub fn center_rows(a0_rows: &[Vec<f64>]) -> Result<Self> {
        let n = a0_rows.len();
        if n < 2 {
            return Err(Error::TooSmall(n));
        }
        for (i, row) in a0_rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSquare(format!(
                    "{} rows but row {} has {} columns",
                    n,
                    i + 1,
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i + 1, col: j + 1 });
                }
            }
        }
        let mut a0 = Vec::with_capacity(n * n);
        for row in a0_rows {
            a0.extend_from_slice(row);
        }
        Ok(Self::from_flat(n, a0))
    }

    /// Same as [`ScoreMatrix::center_rows`] from an already-flat row-major
    /// buffer that is known square and finite.
    pub(crate) fn from_flat(n: usize, a0: Vec<f64>) -> Self {
        debug_assert_eq!(a0.len(), n * n);
        let inv_n = 1.0 / n as f64;
        let mut row_means = Vec::with_capacity(n);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            let row = &a0[i * n..(i + 1) * n];
            let m = csum(row.iter().copied()) * inv_n;
            row_means.push(m);
            for j in 0..n {
                a[i * n + j] = row[j] - m;
            }
        }
        let mut col_means = vec![0.0; n];
        for j in 0..n {
            col_means[j] = csum((0..n).map(|i| a[i * n + j])) * inv_n;
        }
        let grand_mean = csum(a0.iter().copied()) * inv_n * inv_n;
        let a0_scale = a0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Self { n, a0, a, row_means, col_means, grand_mean, a0_scale }
    }

    /// Sum-of-squares threshold below which a derived matrix counts as
    /// identically zero: centering arithmetic leaves residuals of a few
    /// ulps of the raw scale in each entry.
    fn zero_threshold(&self) -> f64 {
        let per_entry = 1e-13 * self.a0_scale;
        (self.n as f64 * per_entry).powi(2)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn a0(&self, i: usize, j: usize) -> f64 {
        self.a0[i * self.n + j]
    }

    /// Row `i` of the centered matrix.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }

    pub fn row_means(&self) -> &[f64] {
        &self.row_means
    }

    /// Column means of the centered matrix (not generally zero).
    pub fn col_means(&self) -> &[f64] {
        &self.col_means
    }

    pub fn grand_mean(&self) -> f64 {
        self.grand_mean
    }

    /// The doubly centered matrix
    /// `atilde(i,j) = a0(i,j) - colmean_j(a0) - rowmean_i(a0) + grandmean(a0)`,
    /// whose row sums and column sums both vanish.
    pub fn tilde_standardize(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        let inv_n = 1.0 / n as f64;
        let a0_col_means: Vec<f64> = (0..n)
            .map(|j| csum((0..n).map(|i| self.a0[i * n + j])) * inv_n)
            .collect();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        self.a0[i * n + j] - a0_col_means[j] - self.row_means[i]
                            + self.grand_mean
                    })
                    .collect()
            })
            .collect()
    }

    /// Sum of squares of the centered matrix.
    pub fn sum_sq(&self) -> f64 {
        csum(self.a.iter().map(|v| v * v))
    }

    /// Sum of cubed absolute values of the centered matrix.
    pub fn sum_abs_cubed(&self) -> f64 {
        csum(self.a.iter().map(|v| v.abs().powi(3)))
    }

    /// Normalization factor for the requested mode.
    ///
    /// Canonical: `s^2 = (n-1)^{-1} sum a^2`. Tilde: the same over the
    /// doubly centered matrix. Errors with [`Error::ZeroMatrix`] when the
    /// matrix in question vanishes identically, and
    /// [`Error::NonPositive`] for a non-positive custom factor.
    pub fn normalization(&self, mode: NormalizationMode) -> Result<Normalization> {
        let ss = match mode {
            NormalizationMode::Canonical => self.sum_sq(),
            NormalizationMode::Tilde => {
                let tilde = self.tilde_standardize();
                csum(tilde.iter().flatten().map(|v| v * v))
            }
            NormalizationMode::Custom => {
                return Err(Error::InvalidConfig(
                    "custom normalization needs an explicit factor; use Normalization::custom"
                        .into(),
                ))
            }
        };
        if ss <= self.zero_threshold() {
            return Err(Error::ZeroMatrix);
        }
        Ok(Normalization { mode, s: (ss / (self.n as f64 - 1.0)).sqrt() })
    }

    /// Lyapounov ratio `L(a) = (n s^3)^{-1} sum_{i,j} |a(i,j)|^3`.
    ///
    /// Scale-invariant when `s` is the canonical normalization.
    pub fn lyapounov_ratio(&self, norm: &Normalization) -> f64 {
        self.sum_abs_cubed() / (self.n as f64 * norm.s.powi(3))
    }

    /// The tilde variant: `(n stilde^3)^{-1} sum |atilde|^3`, computed
    /// from the doubly centered matrix with its own normalization.
    pub fn lyapounov_ratio_tilde(&self) -> Result<f64> {
        let tilde = self.tilde_standardize();
        let ss = csum(tilde.iter().flatten().map(|v| v * v));
        if ss <= self.zero_threshold() {
            return Err(Error::ZeroMatrix);
        }
        let s2 = ss / (self.n as f64 - 1.0);
        let cubes = csum(tilde.iter().flatten().map(|v| v.abs().powi(3)));
        Ok(cubes / (self.n as f64 * s2.powf(1.5)))
    }

    /// Covariance matrix of the Gaussian surrogate:
    /// `sigma_ii = (n s^2)^{-1} sum_l a(i,l)^2` and
    /// `sigma_ij = -(n (n-1) s^2)^{-1} sum_l a(i,l) a(j,l)` off the
    /// diagonal.
    pub fn sigma_matrix(&self, norm: &Normalization) -> SigmaMatrix {
        let n = self.n;
        let nf = n as f64;
        let inv_diag = 1.0 / (nf * norm.s * norm.s);
        let inv_off = -1.0 / (nf * (nf - 1.0) * norm.s * norm.s);
        let mut sigma = vec![0.0; n * n];
        for i in 0..n {
            let ri = self.row(i);
            for j in i..n {
                let dot = crate::sum::cdot(ri, self.row(j));
                let v = if i == j { dot * inv_diag } else { dot * inv_off };
                sigma[i * n + j] = v;
                sigma[j * n + i] = v;
            }
        }
        SigmaMatrix { n, sigma }
    }

    /// `f_n` and `g_n` on the given evaluation times:
    /// `f_n(t) = (n s^2)^{-1} sum_{i <= floor(nt)} sum_l a(i,l)^2` and
    /// `g_n(t,u) = (n s)^{-2} sum_{i <= floor(nt)} sum_{j <= floor(nu)}
    /// sum_l a(i,l) a(j,l)`.
    pub fn empirical_fn_gn(&self, norm: &Normalization, times: &[f64]) -> FnGnGrid {
        let n = self.n;
        let nf = n as f64;
        let cuts: Vec<usize> = times.iter().map(|&t| grid_index(n, t)).collect();
        // Column prefix sums P_k(l) = sum_{i <= k} a(i,l), snapshotted at
        // each requested cut, plus the running sum of squares for f_n.
        let mut order: Vec<usize> = (0..cuts.len()).collect();
        order.sort_by_key(|&idx| cuts[idx]);
        let mut prefix = vec![Kahan::new(); n];
        let mut sq = Kahan::new();
        let mut snapshots: Vec<Vec<f64>> = vec![Vec::new(); cuts.len()];
        let mut f_raw = vec![0.0; cuts.len()];
        let mut pos = 0;
        for k in 0..=n {
            while pos < order.len() && cuts[order[pos]] == k {
                let idx = order[pos];
                snapshots[idx] = prefix.iter().map(|p| p.total()).collect();
                f_raw[idx] = sq.total();
                pos += 1;
            }
            if k == n {
                break;
            }
            let row = self.row(k);
            for (l, &v) in row.iter().enumerate() {
                prefix[l].add(v);
                sq.add(v * v);
            }
        }
        let s2 = norm.s * norm.s;
        let f: Vec<f64> = f_raw.iter().map(|v| v / (nf * s2)).collect();
        let g_scale = 1.0 / (nf * nf * s2);
        let m = cuts.len();
        let mut g = vec![0.0; m * m];
        for x in 0..m {
            for y in x..m {
                let v = crate::sum::cdot(&snapshots[x], &snapshots[y]) * g_scale;
                g[x * m + y] = v;
                g[y * m + x] = v;
            }
        }
        FnGnGrid { times: times.to_vec(), f, g }
    }

    /// The step path `Y(t) = s^{-1} sum_{i <= floor(nt)} a(i, pi(i))`.
    pub fn build_path(&self, norm: &Normalization, pi: &Permutation) -> Result<StepPath> {
        if pi.n() != self.n {
            return Err(Error::InvalidPermutation(format!(
                "permutation of {} elements against an {}x{} matrix",
                pi.n(),
                self.n,
                self.n
            )));
        }
        let mut values = Vec::with_capacity(self.n + 1);
        values.push(0.0);
        let inv_s = 1.0 / norm.s;
        let mut acc = Kahan::new();
        for i in 0..self.n {
            acc.add(self.a(i, pi.image(i)));
            values.push(acc.total() * inv_s);
        }
        StepPath::from_values(values)
    }

    /// Fill an existing buffer with the path values; the hot-loop variant
    /// of [`ScoreMatrix::build_path`] used by the ensemble engine.
    pub(crate) fn fill_path_values(&self, norm: &Normalization, images: &[usize], out: &mut Vec<f64>) {
        out.clear();
        out.push(0.0);
        let inv_s = 1.0 / norm.s;
        let mut acc = 0.0;
        for (i, &j) in images.iter().enumerate() {
            acc += self.a(i, j);
            out.push(acc * inv_s);
        }
    }
}

impl Normalization {
    /// Caller-supplied factor; must be strictly positive.
    pub fn custom(s: f64) -> Result<Self> {
        if !s.is_finite() || s <= 0.0 {
            return Err(Error::NonPositive(s));
        }
        Ok(Self { mode: NormalizationMode::Custom, s })
    }
}

impl SigmaMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.sigma[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.sigma
    }

    /// Largest absolute entry; the scale used for relative comparisons.
    pub fn max_abs(&self) -> f64 {
        self.sigma.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Row sums of the covariance matrix.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| csum(self.sigma[i * self.n..(i + 1) * self.n].iter().copied()))
            .collect()
    }

    /// Partial sum `sum_{i <= p} sum_{j <= q} sigma_ij`.
    pub fn partial_sum(&self, p: usize, q: usize) -> f64 {
        let mut acc = Kahan::new();
        for i in 0..p {
            for j in 0..q {
                acc.add(self.sigma[i * self.n + j]);
            }
        }
        acc.total()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn hand_matrix() -> ScoreMatrix {
        ScoreMatrix::center_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn centers_rows() {
        let m = hand_matrix();
        assert_eq!(m.a(0, 0), 0.0);
        assert_eq!(m.a(0, 1), 0.0);
        assert_abs_diff_eq!(m.a(1, 0), -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.a(1, 1), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn constant_rows_center_to_zero() {
        let m = ScoreMatrix::center_rows(&[vec![3.0, 3.0, 3.0], vec![-1.0, -1.0, -1.0], vec![0.5, 0.5, 0.5]])
            .unwrap();
        assert!(m.row(0).iter().chain(m.row(1)).chain(m.row(2)).all(|&v| v == 0.0));
    }

    #[test]
    fn exceedance_row_structure() {
        // a0(i,j) = 1{i<=j} at n=3 gives a(2,.) = (-2/3, 1/3, 1/3) in
        // 1-based terms, i.e. row index 1 here.
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| if i <= j { 1.0 } else { 0.0 }).collect())
            .collect();
        let m = ScoreMatrix::center_rows(&rows).unwrap();
        assert_abs_diff_eq!(m.a(1, 0), -2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.a(1, 1), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.a(1, 2), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            ScoreMatrix::center_rows(&[vec![1.0]]),
            Err(Error::TooSmall(1))
        ));
        assert!(matches!(
            ScoreMatrix::center_rows(&[vec![1.0, 2.0], vec![3.0]]),
            Err(Error::NotSquare(_))
        ));
        assert!(matches!(
            ScoreMatrix::center_rows(&[vec![1.0, f64::NAN], vec![0.0, 1.0]]),
            Err(Error::NonFinite { row: 1, col: 2 })
        ));
    }

    #[test]
    fn tilde_kills_additive_structure() {
        // a0(i,j) = b(i) + c(j) doubly centers to zero.
        let b = [1.0, -2.0, 0.5, 3.0];
        let c = [0.25, 4.0, -1.0, 2.0];
        let rows: Vec<Vec<f64>> = b.iter().map(|&bi| c.iter().map(|&cj| bi + cj).collect()).collect();
        let m = ScoreMatrix::center_rows(&rows).unwrap();
        for row in m.tilde_standardize() {
            for v in row {
                assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
            }
        }
        assert!(matches!(m.normalization(NormalizationMode::Tilde), Err(Error::ZeroMatrix)));
    }

    #[test]
    fn tilde_idempotent_on_doubly_centered() {
        let m = ScoreMatrix::center_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let t = m.tilde_standardize();
        assert_eq!(t[0], vec![1.0, -1.0]);
        assert_eq!(t[1], vec![-1.0, 1.0]);
    }

    #[test]
    fn tilde_hand_value() {
        let m = ScoreMatrix::center_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let t = m.tilde_standardize();
        assert_abs_diff_eq!(t[0][0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(t[0][1], -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(t[1][0], -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(t[1][1], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn canonical_normalization_hand_value() {
        let m = hand_matrix();
        let norm = m.normalization(NormalizationMode::Canonical).unwrap();
        assert_abs_diff_eq!(norm.s * norm.s, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn custom_normalization_pass_through() {
        let n = Normalization::custom(1.0).unwrap();
        assert_eq!(n.s, 1.0);
        assert!(matches!(Normalization::custom(0.0), Err(Error::NonPositive(_))));
        assert!(matches!(Normalization::custom(-2.0), Err(Error::NonPositive(_))));
    }

    #[test]
    fn lyapounov_hand_value() {
        let m = hand_matrix();
        let norm = m.normalization(NormalizationMode::Canonical).unwrap();
        // (n s^3)^{-1} * 1/4 with n=2, s^2=1/2.
        let expect = 0.25 / (2.0 * 0.5f64.powf(1.5));
        assert_abs_diff_eq!(m.lyapounov_ratio(&norm), expect, epsilon = 1e-14);
        assert_abs_diff_eq!(m.lyapounov_ratio(&norm), 0.353553, epsilon = 1e-6);
    }

    #[test]
    fn centering_and_sigma_are_scale_equivariant() {
        let rows = vec![
            vec![0.3, -1.2, 2.0, 0.7],
            vec![1.0, 1.0, -0.4, 0.1],
            vec![-2.0, 0.6, 0.9, 3.2],
            vec![0.0, 0.25, -1.5, 0.75],
        ];
        let c = 3.7;
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| c * v).collect()).collect();
        let m1 = ScoreMatrix::center_rows(&rows).unwrap();
        let m2 = ScoreMatrix::center_rows(&scaled).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                // center_rows(c a0) = c center_rows(a0).
                assert_abs_diff_eq!(m2.a(i, j), c * m1.a(i, j), epsilon = 1e-12);
            }
        }
        // sigma is invariant under a -> c a with the canonical s.
        let s1 = m1.sigma_matrix(&m1.normalization(NormalizationMode::Canonical).unwrap());
        let s2 = m2.sigma_matrix(&m2.normalization(NormalizationMode::Canonical).unwrap());
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(s1.get(i, j), s2.get(i, j), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn lyapounov_tilde_matches_recentered_route() {
        // The doubly centered matrix is row-centered already, and its
        // canonical normalization equals s-tilde; so the tilde ratio
        // must agree with the plain ratio computed on that matrix.
        let rows = vec![
            vec![0.3, -1.2, 2.0, 0.7],
            vec![1.0, 1.0, -0.4, 0.1],
            vec![-2.0, 0.6, 0.9, 3.2],
            vec![0.0, 0.25, -1.5, 0.75],
        ];
        let m = ScoreMatrix::center_rows(&rows).unwrap();
        let direct = m.lyapounov_ratio_tilde().unwrap();
        let tilde = ScoreMatrix::center_rows(&m.tilde_standardize()).unwrap();
        let norm = tilde.normalization(NormalizationMode::Canonical).unwrap();
        assert_abs_diff_eq!(direct, tilde.lyapounov_ratio(&norm), epsilon = 1e-12);
        // And the tilde matrix's own normalizations coincide.
        let s_tilde = m.normalization(NormalizationMode::Tilde).unwrap();
        assert_abs_diff_eq!(norm.s, s_tilde.s, epsilon = 1e-12);
    }

    #[test]
    fn lyapounov_scale_invariant_under_canonical() {
        let base: Vec<Vec<f64>> = vec![vec![1.0, -0.5, 2.0], vec![0.0, 3.0, 1.0], vec![-2.0, 0.5, 0.25]];
        let m1 = ScoreMatrix::center_rows(&base).unwrap();
        let scaled: Vec<Vec<f64>> =
            base.iter().map(|r| r.iter().map(|v| 7.3 * v).collect()).collect();
        let m2 = ScoreMatrix::center_rows(&scaled).unwrap();
        let n1 = m1.normalization(NormalizationMode::Canonical).unwrap();
        let n2 = m2.normalization(NormalizationMode::Canonical).unwrap();
        assert_abs_diff_eq!(
            m1.lyapounov_ratio(&n1),
            m2.lyapounov_ratio(&n2),
            epsilon = 1e-12
        );
    }

    #[test]
    fn sigma_hand_value() {
        let m = hand_matrix();
        let norm = m.normalization(NormalizationMode::Canonical).unwrap();
        let sig = m.sigma_matrix(&norm);
        assert_abs_diff_eq!(sig.get(0, 0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sig.get(0, 1), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sig.get(1, 1), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn sigma_orthogonal_rows_give_zero_offdiag() {
        let m = ScoreMatrix::center_rows(&[vec![1.0, -1.0, 0.0], vec![1.0, 1.0, -2.0], vec![0.0, 1.0, 2.0]])
            .unwrap();
        // Rows 0 and 1 of the centered matrix are orthogonal by
        // construction: (1,-1,0) . (1,1,-2) = 0.
        let norm = m.normalization(NormalizationMode::Canonical).unwrap();
        let sig = m.sigma_matrix(&norm);
        assert_abs_diff_eq!(sig.get(0, 1), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn sigma_row_sums_match_closed_form() {
        // Row i sums to ((n-1) s^2)^{-1} sum_l a(i,l) (a(i,l) - colsum_l/n),
        // the delta_ij - 1/n structure of the covariance contracted over j.
        let rows = vec![
            vec![0.3, -1.2, 2.0, 0.7],
            vec![1.0, 1.0, -0.4, 0.1],
            vec![-2.0, 0.6, 0.9, 3.2],
            vec![0.0, 0.25, -1.5, 0.75],
        ];
        let m = ScoreMatrix::center_rows(&rows).unwrap();
        let n = m.n();
        let nf = n as f64;
        let norm = m.normalization(NormalizationMode::Canonical).unwrap();
        let sig = m.sigma_matrix(&norm);
        let col_sums: Vec<f64> = (0..n).map(|l| (0..n).map(|j| m.a(j, l)).sum()).collect();
        let scale = sig.max_abs();
        for (i, s) in sig.row_sums().into_iter().enumerate() {
            let expect: f64 = (0..n)
                .map(|l| m.a(i, l) * (m.a(i, l) - col_sums[l] / nf))
                .sum::<f64>()
                / ((nf - 1.0) * norm.s * norm.s);
            assert_abs_diff_eq!(s, expect, epsilon = 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn fn_gn_endpoints() {
        let rows = vec![
            vec![0.3, -1.2, 2.0, 0.7],
            vec![1.0, 1.0, -0.4, 0.1],
            vec![-2.0, 0.6, 0.9, 3.2],
            vec![0.0, 0.25, -1.5, 0.75],
        ];
        let m = ScoreMatrix::center_rows(&rows).unwrap();
        let norm = m.normalization(NormalizationMode::Canonical).unwrap();
        let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
        let fg = m.empirical_fn_gn(&norm, &grid);
        // f_n(0) = 0, g_n(0,u) = 0.
        assert_eq!(fg.f[0], 0.0);
        for y in 0..grid.len() {
            assert_eq!(fg.g[y], 0.0);
        }
        // Canonical s makes f_n(1) = (n-1)/n.
        assert_abs_diff_eq!(fg.f[4], 3.0 / 4.0, epsilon = 1e-12);
        // f_n nondecreasing.
        for w in fg.f.windows(2) {
            assert!(w[1] >= w[0] - 1e-15);
        }
    }

    #[test]
    fn sigma_partial_sums_match_fn_gn() {
        // sum_{i<=p, j<=q} sigma_ij = (n/(n-1)) (f_n(t^u) - g_n(t,u)).
        let rows = vec![
            vec![0.3, -1.2, 2.0, 0.7, 1.1],
            vec![1.0, 1.0, -0.4, 0.1, -0.6],
            vec![-2.0, 0.6, 0.9, 3.2, 0.0],
            vec![0.0, 0.25, -1.5, 0.75, 2.0],
            vec![0.5, -0.5, 1.5, -1.5, 0.1],
        ];
        let m = ScoreMatrix::center_rows(&rows).unwrap();
        let n = m.n() as f64;
        let norm = m.normalization(NormalizationMode::Canonical).unwrap();
        let sig = m.sigma_matrix(&norm);
        let grid = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        let fg = m.empirical_fn_gn(&norm, &grid);
        let g_len = grid.len();
        for x in 0..g_len {
            for y in 0..g_len {
                let p = grid_index(m.n(), grid[x]);
                let q = grid_index(m.n(), grid[y]);
                let lhs = sig.partial_sum(p, q);
                let rhs = n / (n - 1.0) * (fg.f[x.min(y)] - fg.g[x * g_len + y]);
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10 * sig.max_abs().max(1.0));
            }
        }
    }

    #[test]
    fn path_hand_value() {
        let m = hand_matrix();
        let norm = m.normalization(NormalizationMode::Canonical).unwrap();
        let y = m.build_path(&norm, &Permutation::identity(2)).unwrap();
        assert_eq!(y.eval(0.0), 0.0);
        assert_eq!(y.eval(0.75), 0.0);
        assert_abs_diff_eq!(y.eval(1.0), 1.0 / 2.0f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn zero_matrix_with_custom_scale_gives_zero_path() {
        let m = ScoreMatrix::center_rows(&[vec![5.0, 5.0], vec![-1.0, -1.0]]).unwrap();
        let norm = Normalization::custom(1.0).unwrap();
        let y = m.build_path(&norm, &Permutation::reversal(2)).unwrap();
        assert!(y.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn path_rejects_mismatched_permutation() {
        let m = hand_matrix();
        let norm = Normalization::custom(1.0).unwrap();
        assert!(m.build_path(&norm, &Permutation::identity(3)).is_err());
    }

    proptest! {
        #[test]
        fn rows_always_center_to_zero(
            rows in proptest::collection::vec(
                proptest::collection::vec(-1e3f64..1e3, 5), 5)
        ) {
            let m = ScoreMatrix::center_rows(&rows).unwrap();
            let scale = rows.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let tol = 1e-12 * 5.0 * scale.max(1.0);
            for i in 0..5 {
                let sum: f64 = m.row(i).iter().sum();
                prop_assert!(sum.abs() <= tol, "row {} sums to {}", i, sum);
            }
        }
    }
}
