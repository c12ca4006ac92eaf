//! Streaming moment accumulators with a pairwise merge law.
//!
//! Welford updates for scalar mean/variance, and the multivariate
//! extension with all pairwise co-moments. Merging two accumulators
//! agrees with accumulating the concatenated stream (exactly in exact
//! arithmetic, to ~1e-9 relative in floating point), which is what lets
//! ensemble workers run independently and combine in a fixed order.

/// Scalar running mean and second central moment.
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let delta = other.mean - self.mean;
        self.mean += delta * nb / n;
        self.m2 += other.m2 + delta * delta * na * nb / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; `None` below two observations
    /// (insufficient data).
    pub fn variance(&self) -> Option<f64> {
        if self.count < 2 {
            None
        } else {
            Some(self.m2 / (self.count - 1) as f64)
        }
    }

    /// Standard error of the mean.
    pub fn mean_se(&self) -> Option<f64> {
        self.variance().map(|v| (v / self.count as f64).sqrt())
    }
}

/// Joint running moments of a fixed-dimension vector stream: means,
/// variances, and all pairwise covariances.
#[derive(Debug, Clone)]
pub struct VectorStats {
    count: u64,
    dim: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
    /// Upper-triangle co-moments, `j < k`.
    cross: Vec<f64>,
    delta_old: Vec<f64>,
    delta_new: Vec<f64>,
}

#[inline]
fn tri_index(dim: usize, j: usize, k: usize) -> usize {
    debug_assert!(j < k && k < dim);
    // Row-major upper triangle without the diagonal.
    j * dim - j * (j + 1) / 2 + (k - j - 1)
}

impl VectorStats {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            dim,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
            cross: vec![0.0; dim * (dim.saturating_sub(1)) / 2],
            delta_old: vec![0.0; dim],
            delta_new: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn update(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        self.count += 1;
        let c = self.count as f64;
        for ((((xj, mean), d_old), d_new), m2) in x
            .iter()
            .zip(&mut self.mean)
            .zip(&mut self.delta_old)
            .zip(&mut self.delta_new)
            .zip(&mut self.m2)
        {
            *d_old = xj - *mean;
            *mean += *d_old / c;
            *d_new = xj - *mean;
            *m2 += *d_old * *d_new;
        }
        let mut idx = 0;
        for j in 0..self.dim {
            let dj = self.delta_old[j];
            for k in (j + 1)..self.dim {
                self.cross[idx] += dj * self.delta_new[k];
                idx += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &VectorStats) {
        assert_eq!(self.dim, other.dim, "cannot merge stats of different dimension");
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            self.count = other.count;
            self.mean.copy_from_slice(&other.mean);
            self.m2.copy_from_slice(&other.m2);
            self.cross.copy_from_slice(&other.cross);
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let w = na * nb / n;
        for j in 0..self.dim {
            self.delta_old[j] = other.mean[j] - self.mean[j];
        }
        for j in 0..self.dim {
            self.mean[j] += self.delta_old[j] * nb / n;
            self.m2[j] += other.m2[j] + self.delta_old[j] * self.delta_old[j] * w;
        }
        let mut idx = 0;
        for j in 0..self.dim {
            for k in (j + 1)..self.dim {
                self.cross[idx] += other.cross[idx] + self.delta_old[j] * self.delta_old[k] * w;
                idx += 1;
            }
        }
        self.count += other.count;
    }

    pub fn mean(&self, j: usize) -> f64 {
        self.mean[j]
    }

    pub fn variance(&self, j: usize) -> Option<f64> {
        if self.count < 2 {
            None
        } else {
            Some(self.m2[j] / (self.count - 1) as f64)
        }
    }

    /// Sample covariance of coordinates `j` and `k`.
    pub fn covariance(&self, j: usize, k: usize) -> Option<f64> {
        if self.count < 2 {
            return None;
        }
        if j == k {
            return self.variance(j);
        }
        let (j, k) = if j < k { (j, k) } else { (k, j) };
        Some(self.cross[tri_index(self.dim, j, k)] / (self.count - 1) as f64)
    }

    /// Standard error of the covariance estimate, from the Gaussian
    /// fourth-moment formula `Var(cov_hat) = (V_j V_k + cov^2) / M`.
    pub fn covariance_se(&self, j: usize, k: usize) -> Option<f64> {
        let vj = self.variance(j)?;
        let vk = self.variance(k)?;
        let c = self.covariance(j, k)?;
        Some(((vj * vk + c * c) / self.count as f64).sqrt())
    }

    pub fn mean_se(&self, j: usize) -> Option<f64> {
        self.variance(j).map(|v| (v / self.count as f64).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn direct_cov(xs: &[Vec<f64>], j: usize, k: usize) -> f64 {
        let m = xs.len() as f64;
        let mj = xs.iter().map(|x| x[j]).sum::<f64>() / m;
        let mk = xs.iter().map(|x| x[k]).sum::<f64>() / m;
        xs.iter().map(|x| (x[j] - mj) * (x[k] - mk)).sum::<f64>() / (m - 1.0)
    }

    #[test]
    fn matches_direct_two_pass() {
        let data: Vec<Vec<f64>> = (0..100)
            .map(|i| {
                let x = i as f64 * 0.37;
                vec![x.sin(), (x * 1.7).cos() * 2.0, x * 0.01 - 3.0]
            })
            .collect();
        let mut stats = VectorStats::new(3);
        for row in &data {
            stats.update(row);
        }
        for j in 0..3 {
            for k in 0..3 {
                assert_abs_diff_eq!(
                    stats.covariance(j, k).unwrap(),
                    direct_cov(&data, j, k),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn insufficient_data_reports_none() {
        let mut stats = VectorStats::new(2);
        assert!(stats.variance(0).is_none());
        stats.update(&[1.0, 2.0]);
        assert!(stats.variance(0).is_none());
        assert!(stats.covariance(0, 1).is_none());
        stats.update(&[2.0, 1.0]);
        assert!(stats.variance(0).is_some());
    }

    #[test]
    fn welford_merge_is_concatenation() {
        let xs: Vec<f64> = (0..57).map(|i| (i as f64 * 0.9).sin() * 3.0).collect();
        for split in [0usize, 1, 28, 56, 57] {
            let mut a = Welford::new();
            let mut b = Welford::new();
            for &x in &xs[..split] {
                a.update(x);
            }
            for &x in &xs[split..] {
                b.update(x);
            }
            let mut whole = Welford::new();
            for &x in &xs {
                whole.update(x);
            }
            a.merge(&b);
            assert_abs_diff_eq!(a.mean(), whole.mean(), epsilon = 1e-12);
            assert_abs_diff_eq!(
                a.variance().unwrap(),
                whole.variance().unwrap(),
                epsilon = 1e-12
            );
        }
    }

    proptest! {
        #[test]
        fn vector_merge_matches_concatenated_stream(
            xs in proptest::collection::vec(
                proptest::collection::vec(-10.0f64..10.0, 3), 2..40),
            split_frac in 0.0f64..1.0,
        ) {
            let split = ((xs.len() as f64) * split_frac) as usize;
            let mut a = VectorStats::new(3);
            let mut b = VectorStats::new(3);
            for row in &xs[..split] { a.update(row); }
            for row in &xs[split..] { b.update(row); }
            a.merge(&b);
            let mut whole = VectorStats::new(3);
            for row in &xs { whole.update(row); }
            for j in 0..3 {
                prop_assert!((a.mean(j) - whole.mean(j)).abs() <= 1e-9 * (1.0 + whole.mean(j).abs()));
                for k in 0..3 {
                    let ca = a.covariance(j, k).unwrap();
                    let cw = whole.covariance(j, k).unwrap();
                    prop_assert!((ca - cw).abs() <= 1e-9 * (1.0 + cw.abs()),
                        "merge {} vs whole {}", ca, cw);
                }
            }
        }

        #[test]
        fn merge_commutes(
            xs in proptest::collection::vec(
                proptest::collection::vec(-5.0f64..5.0, 2), 2..20),
            ys in proptest::collection::vec(
                proptest::collection::vec(-5.0f64..5.0, 2), 2..20),
        ) {
            let mut a = VectorStats::new(2);
            for row in &xs { a.update(row); }
            let mut b = VectorStats::new(2);
            for row in &ys { b.update(row); }
            let mut ab = a.clone();
            ab.merge(&b);
            let mut ba = b.clone();
            ba.merge(&a);
            for j in 0..2 {
                for k in 0..2 {
                    let x = ab.covariance(j, k).unwrap();
                    let y = ba.covariance(j, k).unwrap();
                    prop_assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()));
                }
            }
        }
    }
}
