//! One-sample Kolmogorov-Smirnov test against a normal distribution.

use crate::{Error, Result};

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Asymptotic Kolmogorov tail `Q(lambda) = 2 sum_{k>=1} (-1)^{k-1}
/// exp(-2 k^2 lambda^2)`, the limiting p-value of `sqrt(M) D`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200u32 {
        let e = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += sign * e;
        if e < 1e-14 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct KsTest {
    /// Two-sided sup distance between the empirical CDF and the target.
    pub statistic: f64,
    /// Asymptotic p-value `Q(sqrt(M) D)`.
    pub p_value: f64,
    pub samples: usize,
}

/// Test `samples` against `N(mean, sd^2)`.
///
/// Requires `sd > 0` and at least 100 observations (the p-value is
/// asymptotic); a constant sample is rejected as degenerate.
pub fn ks_normal(samples: &[f64], mean: f64, sd: f64) -> Result<KsTest> {
    if !sd.is_finite() || sd <= 0.0 {
        return Err(Error::InvalidConfig(format!("ks_normal needs sd > 0, got {sd}")));
    }
    let m = samples.len();
    if m < 100 {
        return Err(Error::InvalidConfig(format!(
            "ks_normal needs at least 100 samples, got {m}"
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
    if sorted[0] == sorted[m - 1] {
        return Err(Error::DegenerateSample);
    }
    let mf = m as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = normal_cdf((x - mean) / sd);
        d = d.max(cdf - i as f64 / mf).max((i + 1) as f64 / mf - cdf);
    }
    Ok(KsTest { statistic: d, p_value: kolmogorov_q(mf.sqrt() * d), samples: m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn cdf_reference_values() {
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(normal_cdf(1.959963984540054), 0.975, epsilon = 1e-9);
        assert_abs_diff_eq!(normal_cdf(-1.0), 0.15865525393145707, epsilon = 1e-12);
    }

    #[test]
    fn kolmogorov_q_reference_values() {
        // Q at the classical 5% and 1% critical points.
        assert_abs_diff_eq!(kolmogorov_q(1.3581), 0.05, epsilon = 2e-4);
        assert_abs_diff_eq!(kolmogorov_q(1.6276), 0.01, epsilon = 1e-4);
        assert_eq!(kolmogorov_q(0.0), 1.0);
        assert!(kolmogorov_q(5.0) < 1e-10);
    }

    #[test]
    fn calibrated_on_true_normals() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let t = ks_normal(&xs, 0.0, 1.0).unwrap();
        assert!(t.p_value > 0.01, "p = {}", t.p_value);
    }

    #[test]
    fn rejects_wrong_location() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let xs: Vec<f64> =
            (0..10_000).map(|_| rng.sample::<f64, _>(StandardNormal) + 0.25).collect();
        let t = ks_normal(&xs, 0.0, 1.0).unwrap();
        assert!(t.p_value < 1e-6, "p = {}", t.p_value);
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        let xs = vec![1.0; 200];
        assert!(matches!(ks_normal(&xs, 0.0, 1.0), Err(Error::DegenerateSample)));
        assert!(ks_normal(&xs, 0.0, 0.0).is_err());
        assert!(ks_normal(&[1.0, 2.0], 0.0, 1.0).is_err());
    }
}
