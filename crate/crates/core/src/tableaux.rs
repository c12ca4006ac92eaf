//! Weak exceedances of random permutations and the statistics of the
//! permutation tableau they encode.
//!
//! A weak exceedance of `pi` is a position with `pi(i) >= i`. The running
//! count `S0(t)` drives everything here: the centered, `sqrt(n)`-scaled
//! process `Yhat`, the tableau's lower-right boundary polyline (step `i`
//! goes down iff position `i` is an exceedance), the tableau area, and
//! the row count. Exact first and second moments of the indicators have
//! closed forms, the limit covariance of `Yhat` is an explicit
//! polynomial, and the boundary concentrates on a parabola arc.

use crate::matrix::ScoreMatrix;
use crate::path::StepPath;
use crate::perm::Permutation;
use crate::{Error, Result};

/// Mean curve `mu(t) = t (1 - t/2)` of the exceedance fraction.
#[inline]
pub fn mu(t: f64) -> f64 {
    t * (1.0 - 0.5 * t)
}

/// Score matrix of the exceedance family: `a0(i,j) = 1{i <= j}`, centered
/// to `a(i,j) = 1{i <= j} - 1 + (i-1)/n` (1-based indices).
pub fn exceedance_matrix(n: usize) -> Result<ScoreMatrix> {
    if n < 2 {
        return Err(Error::TooSmall(n));
    }
    let mut a0 = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            a0[i * n + j] = 1.0;
        }
    }
    Ok(ScoreMatrix::from_flat(n, a0))
}

/// Limit of the rescaled score matrix: `alpha(v,w) = 1{v <= w} - 1 + v`.
#[inline]
pub fn alpha(v: f64, w: f64) -> f64 {
    if v <= w {
        v
    } else {
        v - 1.0
    }
}

/// Limit `f(t) = 3t^2 - 2t^3` of `f_n` for the exceedance family.
#[inline]
pub fn limit_f(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Limit `g(t,u) = 3t^2 u - t^3 - (3/2) t^2 u^2` (for `t <= u`,
/// symmetrized otherwise) of `g_n` for the exceedance family.
#[inline]
pub fn limit_g(t: f64, u: f64) -> f64 {
    let (t, u) = if t <= u { (t, u) } else { (u, t) };
    3.0 * t * t * u - t * t * t - 1.5 * t * t * u * u
}

/// Limit covariance of the normalized exceedance process:
/// `sigma_hat(t,u) = (1/2) t^2 (1 - u + u^2/2) - t^3/6` for `t <= u`,
/// symmetrized otherwise. Equals `(f(t^u) - g(t,u)) / 6`.
pub fn limit_cov_hat(t: f64, u: f64) -> Result<f64> {
    for &x in &[t, u] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::RangeError(x));
        }
    }
    let (t, u) = if t <= u { (t, u) } else { (u, t) };
    Ok(0.5 * t * t * (1.0 - u + 0.5 * u * u) - t * t * t / 6.0)
}

/// Exact closed-form moments of the exceedance indicators (1-based
/// positions).
#[derive(Debug, Clone, Copy)]
pub struct ExactMoments {
    /// `E I_i = (n - i + 1) / n`.
    pub e_i: f64,
    /// `E I_i I_j = (n - i)(n - j + 1) / ((n - 1) n)` for `i < j`.
    pub e_ij: f64,
    /// `E(I_i | I_j = 1) = (n - i) / (n - 1)` for `i < j`.
    pub e_i_given_j: f64,
    /// `E S0(k/n) = k (2n - k + 1) / (2n)`.
    pub e_s0_k: f64,
}

/// Evaluate all four closed forms; requires `1 <= i < j <= n` and
/// `0 <= k <= n`.
pub fn exact_moments(n: usize, i: usize, j: usize, k: usize) -> Result<ExactMoments> {
    if n < 2 {
        return Err(Error::TooSmall(n));
    }
    if i >= j {
        return Err(Error::IndexOrder { i, j });
    }
    if i < 1 || j > n || k > n {
        return Err(Error::InvalidConfig(format!(
            "moment indices out of range: n={n}, i={i}, j={j}, k={k}"
        )));
    }
    let (nf, fi, fj, fk) = (n as f64, i as f64, j as f64, k as f64);
    Ok(ExactMoments {
        e_i: (nf - fi + 1.0) / nf,
        e_ij: (nf - fi) * (nf - fj + 1.0) / ((nf - 1.0) * nf),
        e_i_given_j: (nf - fi) / (nf - 1.0),
        e_s0_k: fk * (2.0 * nf - fk + 1.0) / (2.0 * nf),
    })
}

/// Everything derived from one permutation's exceedance pattern.
#[derive(Debug, Clone)]
pub struct ExceedanceRecord {
    n: usize,
    /// `I_i = 1{pi(i) >= i}`, 0-based storage.
    indicators: Vec<bool>,
    /// `s0[k] = S0(k/n)`, the exceedance count among the first k positions.
    s0: Vec<u64>,
    /// `Yhat(t) = n^{-1/2} (S0(t) - n mu(t))` on the grid.
    y_hat: StepPath,
    /// Row count `R_n = S0(1)`.
    r_n: u64,
    /// Tableau area `A_n`, via the partial-sum identity.
    a_n: u64,
}

impl ExceedanceRecord {
    pub fn from_permutation(pi: &Permutation) -> Self {
        let n = pi.n();
        let mut indicators = Vec::with_capacity(n);
        let mut s0 = Vec::with_capacity(n + 1);
        s0.push(0u64);
        let mut count = 0u64;
        let mut sum_s0 = 0u64;
        for i in 0..n {
            let hit = pi.image(i) >= i;
            indicators.push(hit);
            count += hit as u64;
            s0.push(count);
            sum_s0 += count;
        }
        let r_n = count;
        // A_n = sum_i S0(i/n) - R(R+1)/2, exactly in integers.
        let a_n = sum_s0 - r_n * (r_n + 1) / 2;
        let sqrt_n = (n as f64).sqrt();
        let values = (0..=n)
            .map(|k| {
                let t = k as f64 / n as f64;
                (s0[k] as f64 - n as f64 * mu(t)) / sqrt_n
            })
            .collect();
        let y_hat = StepPath::from_values(values).expect("n+1 >= 1 values");
        Self { n, indicators, s0, y_hat, r_n, a_n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn indicators(&self) -> &[bool] {
        &self.indicators
    }

    /// `S0(k/n)` for `k = 0..=n`.
    pub fn s0(&self) -> &[u64] {
        &self.s0
    }

    pub fn y_hat(&self) -> &StepPath {
        &self.y_hat
    }

    pub fn row_count(&self) -> u64 {
        self.r_n
    }

    pub fn area(&self) -> u64 {
        self.a_n
    }

    /// The defining double sum `A_n = sum_i I_i sum_{j > i} (1 - I_j)`,
    /// kept as an independent O(n^2) route for checking the partial-sum
    /// identity.
    pub fn area_double_sum(&self) -> u64 {
        let mut total = 0u64;
        for i in 0..self.n {
            if self.indicators[i] {
                for j in (i + 1)..self.n {
                    total += !self.indicators[j] as u64;
                }
            }
        }
        total
    }

    /// Lower-right boundary polyline of the corresponding tableau.
    pub fn boundary(&self) -> BoundaryPolyline {
        let n = self.n as i64;
        let r = self.r_n as i64;
        let points = (0..=self.n)
            .map(|l| (n - r - l as i64 + self.s0[l] as i64, self.s0[l] as i64))
            .collect();
        BoundaryPolyline { n: self.n, points }
    }
}

/// Lattice polyline from `(n - R, 0)` to `(0, R)`; the y axis points
/// downward, so a "down" step increments y.
#[derive(Debug, Clone)]
pub struct BoundaryPolyline {
    n: usize,
    points: Vec<(i64, i64)>,
}

impl BoundaryPolyline {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> &[(i64, i64)] {
        &self.points
    }

    /// Sup over vertices of the axis-parallel distance from the
    /// `1/n`-scaled polyline to the limiting parabola arc
    /// `{x + y = 3/4 - (x - y)^2, x, y >= 0}`.
    pub fn sup_distance_to_parabola(&self) -> f64 {
        let n = self.n as f64;
        self.points
            .iter()
            .map(|&(x, y)| parabola_distance(x as f64 / n, y as f64 / n))
            .fold(0.0f64, f64::max)
    }
}

/// Distance from `(px, py)` to the arc `{((1-t^2)/2, (1-(1-t)^2)/2), t in
/// [0,1]}` along whichever coordinate directions intersect it.
fn parabola_distance(px: f64, py: f64) -> f64 {
    let mut d = f64::INFINITY;
    if (0.0..=0.5).contains(&py) {
        // Horizontal ray hits the arc at parameter t with y(t) = py.
        let t = 1.0 - (1.0 - 2.0 * py).sqrt();
        d = d.min((px - 0.5 * (1.0 - t * t)).abs());
    }
    if (0.0..=0.5).contains(&px) {
        let t = (1.0 - 2.0 * px).sqrt();
        let one_minus = 1.0 - t;
        d = d.min((py - 0.5 * (1.0 - one_minus * one_minus)).abs());
    }
    if d.is_finite() {
        d
    } else {
        // Off both coordinate shadows of the arc; fall back to the
        // nearer endpoint.
        let d0 = ((px - 0.5).powi(2) + py * py).sqrt();
        let d1 = (px * px + (py - 0.5).powi(2)).sqrt();
        d0.min(d1)
    }
}

/// Canonical-normalization statistics of the exceedance family computed
/// from the closed row structure in O(n): each centered row takes the
/// value `(i-1)/n` at `n-i+1` columns and `(i-1)/n - 1` at the rest.
/// Lets Lyapounov ratios be evaluated at n = 1e4 without materializing
/// the 1e8-entry matrix.
#[derive(Debug, Clone, Copy)]
pub struct ExceedanceScale {
    /// Canonical `s^2 = (n-1)^{-1} sum a^2`.
    pub s_squared: f64,
    /// `sum |a|^3`.
    pub sum_abs_cubed: f64,
    /// Lyapounov ratio `(n s^3)^{-1} sum |a|^3`.
    pub lyapounov: f64,
}

pub fn exceedance_scale(n: usize) -> Result<ExceedanceScale> {
    if n < 2 {
        return Err(Error::TooSmall(n));
    }
    let nf = n as f64;
    let mut sum_sq = crate::sum::Kahan::new();
    let mut sum_cu = crate::sum::Kahan::new();
    for i in 1..=n {
        let hi = (i as f64 - 1.0) / nf;
        let lo = hi - 1.0;
        let hi_count = (n - i + 1) as f64;
        let lo_count = (i - 1) as f64;
        sum_sq.add(hi_count * hi * hi + lo_count * lo * lo);
        sum_cu.add(hi_count * hi.abs().powi(3) + lo_count * lo.abs().powi(3));
    }
    let s_squared = sum_sq.total() / (nf - 1.0);
    let sum_abs_cubed = sum_cu.total();
    Ok(ExceedanceScale {
        s_squared,
        sum_abs_cubed,
        lyapounov: sum_abs_cubed / (nf * s_squared.powf(1.5)),
    })
}

/// Limiting value of `Lambda^(n) sqrt(n)` for the exceedance family:
/// `(int int |alpha|^3) / ||alpha||_2^3 = (1/10) 6^{3/2}`.
pub fn lyapounov_limit() -> f64 {
    0.1 * 6.0f64.powf(1.5)
}

/// Variance of the limiting area fluctuation, by closed-form integration
/// of the polynomial covariance kernel:
/// `int int sigma_hat - int sigma_hat(t,1) dt + sigma_hat(1,1)/4`.
pub fn area_limit_variance() -> f64 {
    area_functional_variance(&sigma_hat_poly())
}

/// Same integral for an arbitrary bivariate polynomial kernel given on
/// the region `t <= u` (symmetrized across the diagonal).
fn area_functional_variance(kernel: &Poly2) -> f64 {
    // Double integral over the square = twice the integral over {t <= u}.
    let double = 2.0 * kernel.integrate_u_from_t_to_1().integrate_01();
    // sigma_hat(t, 1) as a polynomial in t.
    let slice = kernel.substitute_u_one();
    let line = slice.integrate_01();
    let corner = slice.eval(1.0);
    double - line + 0.25 * corner
}

/// `sigma_hat` on `{t <= u}` as polynomial coefficients `c[i][j] t^i u^j`:
/// `t^2/2 - t^2 u / 2 + t^2 u^2 / 4 - t^3/6`.
fn sigma_hat_poly() -> Poly2 {
    let mut c = vec![vec![0.0; 3]; 4];
    c[2][0] = 0.5;
    c[2][1] = -0.5;
    c[2][2] = 0.25;
    c[3][0] = -1.0 / 6.0;
    Poly2 { c }
}

/// Bivariate polynomial with coefficient grid `c[i][j]` on `t^i u^j`.
struct Poly2 {
    c: Vec<Vec<f64>>,
}

/// Univariate polynomial, `c[k] t^k`.
struct Poly1 {
    c: Vec<f64>,
}

impl Poly2 {
    /// `int_t^1 poly du` as a polynomial in t:
    /// `int_t^1 t^i u^j du = t^i / (j+1) - t^{i+j+1} / (j+1)`.
    fn integrate_u_from_t_to_1(&self) -> Poly1 {
        let deg_t = self.c.len();
        let deg_u = self.c.iter().map(|r| r.len()).max().unwrap_or(0);
        let mut out = vec![0.0; deg_t + deg_u + 1];
        for (i, row) in self.c.iter().enumerate() {
            for (j, &coef) in row.iter().enumerate() {
                if coef == 0.0 {
                    continue;
                }
                let inv = 1.0 / (j as f64 + 1.0);
                out[i] += coef * inv;
                out[i + j + 1] -= coef * inv;
            }
        }
        Poly1 { c: out }
    }

    fn substitute_u_one(&self) -> Poly1 {
        let c = self.c.iter().map(|row| row.iter().sum()).collect();
        Poly1 { c }
    }
}

impl Poly1 {
    fn integrate_01(&self) -> f64 {
        self.c
            .iter()
            .enumerate()
            .map(|(k, &coef)| coef / (k as f64 + 1.0))
            .sum()
    }

    fn eval(&self, t: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, &coef| acc * t + coef)
    }
}
