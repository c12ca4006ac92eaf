//! Smooth test functionals on step paths.
//!
//! The catalog centers on soft ball indicators: `ball(w) =
//! cutoff((h(w - center) - rho) / eta)` where `h` is the softened L^p
//! norm `h_{eps,p}(y) = (int_0^1 (eps^2 + y(t)^2)^{p/2} dt)^{1/p}`. The
//! value is 1 whenever `h <= rho`, 0 whenever `h >= rho + eta`, and C^3
//! smooth in between, which is what makes expectations of these
//! functionals comparable across a step process and its Gaussian
//! surrogate. Point evaluation and the path integral round out the
//! catalog for distance experiments.

use crate::path::StepPath;
use crate::{Error, Result};

/// `h_{eps,p}(y)`: the L^p norm of `sqrt(eps^2 + y^2)` over `[0,1]`,
/// integrated exactly over the constancy intervals of the step path.
///
/// Always `>= eps`, and `>= ||y||_p`. Computed against the running
/// maximum of the integrand so that large `p` cannot overflow.
pub fn h_eps_p(y: &StepPath, eps: f64, p: f64) -> f64 {
    debug_assert!(eps > 0.0 && p >= 1.0);
    let n = y.n();
    let vals = &y.values()[..n.max(1)];
    let dt = 1.0 / n.max(1) as f64;
    let mut peak = 0.0f64;
    for &v in vals {
        peak = peak.max(eps * eps + v * v);
    }
    if peak == 0.0 {
        return 0.0;
    }
    let half_p = 0.5 * p;
    let mut sum = 0.0;
    for &v in vals {
        sum += ((eps * eps + v * v) / peak).powf(half_p) * dt;
    }
    peak.sqrt() * sum.powf(1.0 / p)
}

/// Plain `L^p` norm of a step path, `(int |y|^p)^{1/p}`.
pub fn lp_norm(y: &StepPath, p: f64) -> f64 {
    let n = y.n();
    let vals = &y.values()[..n.max(1)];
    let dt = 1.0 / n.max(1) as f64;
    let peak = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for &v in vals {
        sum += (v.abs() / peak).powf(p) * dt;
    }
    peak * sum.powf(1.0 / p)
}

/// C^3 cutoff: nonincreasing, `phi(x) = 1` for `x <= 0`, `phi(x) = 0` for
/// `x >= 1`. Realized as the reversed degree-7 smoothstep
/// `1 - (35 x^4 - 84 x^5 + 70 x^6 - 20 x^7)`, whose first three
/// derivatives vanish at both junctions.
pub fn phi_cutoff(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        let x2 = x * x;
        let x4 = x2 * x2;
        1.0 - x4 * (35.0 - 84.0 * x + 70.0 * x2 - 20.0 * x2 * x)
    }
}

/// `phi((x - rho) / eta)`.
pub fn phi_rho_eta(x: f64, rho: f64, eta: f64) -> f64 {
    debug_assert!(eta > 0.0);
    phi_cutoff((x - rho) / eta)
}

/// A soft ball indicator `g{eps, p, rho, eta, center}`.
#[derive(Debug, Clone)]
pub struct BallFunctional {
    pub eps: f64,
    pub p: f64,
    pub rho: f64,
    pub eta: f64,
    /// Center path; `None` means the zero path on whatever grid the
    /// argument lives on.
    pub center: Option<StepPath>,
}

impl BallFunctional {
    pub fn new(eps: f64, p: f64, rho: f64, eta: f64, center: Option<StepPath>) -> Result<Self> {
        if !eps.is_finite() || eps <= 0.0 {
            return Err(Error::InvalidConfig(format!("ball eps must be > 0, got {eps}")));
        }
        if !p.is_finite() || p < 1.0 {
            return Err(Error::InvalidConfig(format!("ball p must be >= 1, got {p}")));
        }
        if !eta.is_finite() || eta <= 0.0 {
            return Err(Error::InvalidConfig(format!("ball eta must be > 0, got {eta}")));
        }
        Ok(Self { eps, p, rho, eta, center })
    }

    /// Evaluate on a path. Output is always in `[0,1]`: exactly 1 on
    /// `{h <= rho}` and exactly 0 on `{h >= rho + eta}`.
    pub fn eval(&self, w: &StepPath) -> Result<f64> {
        let h = match &self.center {
            Some(s) => {
                if s.n() != w.n() {
                    return Err(Error::GridMismatch(w.n(), s.n()));
                }
                h_eps_p(&w.sub(s)?, self.eps, self.p)
            }
            None => h_eps_p(w, self.eps, self.p),
        };
        Ok(phi_rho_eta(h, self.rho, self.eta))
    }

    /// The analytic scale `p^2 eps^{-2} eta^{-3}` of the functional's
    /// smoothness norm. Relative only: the universal constant in front is
    /// not known.
    pub fn norm_scale(&self) -> f64 {
        self.p * self.p / (self.eps * self.eps * self.eta.powi(3))
    }
}

/// Catalog entry: what to evaluate on each sampled path.
#[derive(Debug, Clone)]
pub enum PathFunctional {
    Ball(BallFunctional),
    /// Point evaluation `w(t)`.
    Eval { t: f64 },
    /// `int_0^1 w(t) dt`.
    Integral,
}

impl PathFunctional {
    pub fn eval(&self, w: &StepPath) -> Result<f64> {
        match self {
            PathFunctional::Ball(b) => b.eval(w),
            PathFunctional::Eval { t } => Ok(w.eval(*t)),
            PathFunctional::Integral => Ok(w.integral()),
        }
    }

    /// Parse a functional spec string:
    /// `ball:eps=..:p=..:rho=..:eta=..[:center=zero]`, `eval:t=..`, or
    /// `integral`. Ball centers other than `zero` are loaded by the CLI
    /// before this point; here only `zero` is accepted.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut parts = spec.split(':');
        let kind = parts.next().unwrap_or_default();
        match kind {
            "integral" => Ok(PathFunctional::Integral),
            "eval" => {
                let mut t = None;
                for part in parts {
                    match part.split_once('=') {
                        Some(("t", v)) => t = Some(parse_f64(v, spec)?),
                        _ => return Err(bad_spec(spec, part)),
                    }
                }
                let t = t.ok_or_else(|| Error::Parse(format!("'{spec}': missing t=")))?;
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::RangeError(t));
                }
                Ok(PathFunctional::Eval { t })
            }
            "ball" => {
                let (mut eps, mut p, mut rho, mut eta) = (None, None, None, None);
                for part in parts {
                    match part.split_once('=') {
                        Some(("eps", v)) => eps = Some(parse_f64(v, spec)?),
                        Some(("p", v)) => p = Some(parse_f64(v, spec)?),
                        Some(("rho", v)) => rho = Some(parse_f64(v, spec)?),
                        Some(("eta", v)) => eta = Some(parse_f64(v, spec)?),
                        Some(("center", "zero")) => {}
                        _ => return Err(bad_spec(spec, part)),
                    }
                }
                let missing = |name: &str| Error::Parse(format!("'{spec}': missing {name}="));
                let b = BallFunctional::new(
                    eps.ok_or_else(|| missing("eps"))?,
                    p.ok_or_else(|| missing("p"))?,
                    rho.ok_or_else(|| missing("rho"))?,
                    eta.ok_or_else(|| missing("eta"))?,
                    None,
                )?;
                Ok(PathFunctional::Ball(b))
            }
            other => Err(Error::Parse(format!("unknown functional kind '{other}' in '{spec}'"))),
        }
    }

    /// Canonical name used in result documents.
    pub fn label(&self) -> String {
        match self {
            PathFunctional::Ball(b) => format!(
                "ball:eps={}:p={}:rho={}:eta={}",
                b.eps, b.p, b.rho, b.eta
            ),
            PathFunctional::Eval { t } => format!("eval:t={t}"),
            PathFunctional::Integral => "integral".into(),
        }
    }
}

fn parse_f64(v: &str, spec: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::Parse(format!("'{spec}': bad number '{v}'")))
}

fn bad_spec(spec: &str, part: &str) -> Error {
    Error::Parse(format!("'{spec}': unrecognized component '{part}'"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn h_of_zero_path_is_eps() {
        let y = StepPath::zero(8);
        for &p in &[1.0, 2.0, 7.5, 64.0] {
            assert_abs_diff_eq!(h_eps_p(&y, 0.3, p), 0.3, epsilon = 1e-12);
        }
    }

    #[test]
    fn h_of_constant_path() {
        let y = StepPath::from_values(vec![2.0; 11]).unwrap();
        // h = sqrt(eps^2 + c^2) for constant paths, any p.
        let expect = (0.25f64 + 4.0).sqrt();
        for &p in &[1.0, 3.0, 32.0] {
            assert_abs_diff_eq!(h_eps_p(&y, 0.5, p), expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn h_large_p_approaches_sup() {
        // At p = 64 the gap to the sup norm scales like
        // 1 - measure(near-max set)^{1/p}; a path spending most of its
        // time at the max is within 1e-2 already.
        let y = StepPath::from_values(vec![2.0, 2.0, -2.0, 0.3, 2.0, 1.0]).unwrap();
        let eps = 0.7;
        let direct = y.values()[..5]
            .iter()
            .map(|v| (eps * eps + v * v).sqrt())
            .fold(0.0f64, f64::max);
        assert!((h_eps_p(&y, eps, 64.0) - direct).abs() < 1e-2);

        // And the convergence is monotone in p for a lone spike.
        let spike = StepPath::from_values(vec![0.1, -0.4, 2.0, 0.3, 1.1]).unwrap();
        let sup = spike.values()[..4]
            .iter()
            .map(|v| (eps * eps + v * v).sqrt())
            .fold(0.0f64, f64::max);
        let gap64 = (h_eps_p(&spike, eps, 64.0) - sup).abs();
        let gap512 = (h_eps_p(&spike, eps, 512.0) - sup).abs();
        assert!(gap512 < gap64);
        assert!(gap512 < 1e-2);
    }

    #[test]
    fn h_no_overflow_at_huge_p() {
        let y = StepPath::from_values(vec![50.0; 5]).unwrap();
        let h = h_eps_p(&y, 1.0, 512.0);
        assert!(h.is_finite());
        assert_abs_diff_eq!(h, (1.0f64 + 2500.0).sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn phi_junction_values() {
        assert_eq!(phi_cutoff(-1.0), 1.0);
        assert_eq!(phi_cutoff(0.0), 1.0);
        assert_eq!(phi_cutoff(1.0), 0.0);
        assert_eq!(phi_cutoff(2.0), 0.0);
        assert!(phi_cutoff(0.5) > 0.0 && phi_cutoff(0.5) < 1.0);
        assert_eq!(phi_rho_eta(0.4, 0.4, 0.1), 1.0);
    }

    #[test]
    fn phi_derivatives_vanish_at_junctions() {
        // Central finite differences of orders 1..3 at x in {0,1} shrink
        // as the step does.
        let d1 = |x: f64, h: f64| (phi_cutoff(x + h) - phi_cutoff(x - h)) / (2.0 * h);
        let d2 = |x: f64, h: f64| {
            (phi_cutoff(x + h) - 2.0 * phi_cutoff(x) + phi_cutoff(x - h)) / (h * h)
        };
        let d3 = |x: f64, h: f64| {
            (phi_cutoff(x + 2.0 * h) - 2.0 * phi_cutoff(x + h) + 2.0 * phi_cutoff(x - h)
                - phi_cutoff(x - 2.0 * h))
                / (2.0 * h * h * h)
        };
        for &x in &[0.0, 1.0] {
            for (coarse, fine) in [(1e-2, 1e-3), (1e-3, 1e-4)] {
                assert!(d1(x, fine).abs() <= d1(x, coarse).abs() + 1e-12);
                assert!(d2(x, fine).abs() <= d2(x, coarse).abs() + 1e-9);
                assert!(d3(x, fine).abs() <= d3(x, coarse).abs() + 1e-4);
            }
            assert!(d1(x, 1e-4).abs() < 1e-8);
            assert!(d2(x, 1e-4).abs() < 1e-4);
        }
    }

    #[test]
    fn phi_nonincreasing() {
        let mut last = f64::INFINITY;
        for k in 0..=1000 {
            let v = phi_cutoff(-0.5 + 2.0 * k as f64 / 1000.0);
            assert!(v <= last + 1e-15);
            last = v;
        }
    }

    #[test]
    fn ball_at_center() {
        let s = StepPath::from_values(vec![0.5, 1.0, -0.25]).unwrap();
        // rho >= eps makes the value exactly 1 at the center.
        let g = BallFunctional::new(0.2, 2.0, 0.5, 0.1, Some(s.clone())).unwrap();
        assert_eq!(g.eval(&s).unwrap(), 1.0);
    }

    #[test]
    fn ball_far_away_is_zero() {
        let g = BallFunctional::new(0.2, 2.0, 0.5, 0.1, None).unwrap();
        let w = StepPath::from_values(vec![100.0; 4]).unwrap();
        assert_eq!(g.eval(&w).unwrap(), 0.0);
    }

    #[test]
    fn ball_indicator_sandwich() {
        // ||w - s|| < gamma implies g{eps*gamma, p, gamma*sqrt(1+eps^2), eta} = 1.
        let gamma = 0.8;
        let eps = 0.3;
        let s = StepPath::zero(6);
        let g = BallFunctional::new(
            eps * gamma,
            4.0,
            gamma * (1.0 + eps * eps).sqrt(),
            0.05,
            Some(s),
        )
        .unwrap();
        let w = StepPath::from_values(vec![0.79, -0.5, 0.3, 0.0, 0.7, -0.79, 0.1]).unwrap();
        assert_eq!(g.eval(&w).unwrap(), 1.0);
    }

    #[test]
    fn ball_grid_mismatch() {
        let g = BallFunctional::new(0.2, 2.0, 0.5, 0.1, Some(StepPath::zero(4))).unwrap();
        let w = StepPath::zero(5);
        assert!(matches!(g.eval(&w), Err(Error::GridMismatch(5, 4))));
    }

    #[test]
    fn norm_scale_exponents() {
        let g = BallFunctional::new(1.0, 1.0, 0.5, 1.0, None).unwrap();
        assert_eq!(g.norm_scale(), 1.0);
        let g2 = BallFunctional::new(1.0, 1.0, 0.5, 2.0, None).unwrap();
        assert_abs_diff_eq!(g2.norm_scale(), 1.0 / 8.0, epsilon = 1e-15);
        let g3 = BallFunctional::new(1.0, 2.0, 0.5, 1.0, None).unwrap();
        assert_abs_diff_eq!(g3.norm_scale(), 4.0, epsilon = 1e-15);
    }

    #[test]
    fn parse_round_trips() {
        let f = PathFunctional::parse("ball:eps=0.25:p=2:rho=0.5:eta=0.25").unwrap();
        assert!(matches!(f, PathFunctional::Ball(_)));
        assert!(matches!(
            PathFunctional::parse("eval:t=0.5").unwrap(),
            PathFunctional::Eval { .. }
        ));
        assert!(matches!(
            PathFunctional::parse("integral").unwrap(),
            PathFunctional::Integral
        ));
        assert!(PathFunctional::parse("ball:eps=0.1").is_err());
        assert!(PathFunctional::parse("nope").is_err());
        assert!(PathFunctional::parse("eval:t=1.5").is_err());
    }

    #[test]
    fn ball_lipschitz_probe() {
        // |g(w) - g(w')| <= L ||w - w'||_inf with L = sup|phi'| / eta:
        // h is 1-Lipschitz in the sup norm and the degree-7 smoothstep
        // has derivative at most 35/16 in magnitude.
        let (eps, p, rho, eta) = (0.2, 3.0, 0.5, 0.25);
        let g = BallFunctional::new(eps, p, rho, eta, None).unwrap();
        let lipschitz = 35.0 / 16.0 / eta;
        let mut rng_state = 88172645463325252u64;
        let mut next = move || {
            // xorshift; plenty for probe paths.
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state as f64 / u64::MAX as f64) * 2.0 - 1.0
        };
        let mut worst = 0.0f64;
        for _ in 0..500 {
            let n = 10;
            let w: Vec<f64> = (0..=n).map(|_| next() * 1.5).collect();
            let delta: Vec<f64> = (0..=n).map(|_| next() * 0.05).collect();
            let sup: f64 = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            if sup == 0.0 {
                continue;
            }
            let w1 = StepPath::from_values(w.clone()).unwrap();
            let w2 = StepPath::from_values(
                w.iter().zip(&delta).map(|(a, d)| a + d).collect(),
            )
            .unwrap();
            let diff = (g.eval(&w1).unwrap() - g.eval(&w2).unwrap()).abs();
            worst = worst.max(diff / sup);
        }
        assert!(worst.is_finite());
        assert!(worst <= lipschitz + 1e-9, "ratio {worst} vs L {lipschitz}");
    }

    fn arb_path(n: usize) -> impl Strategy<Value = StepPath> {
        proptest::collection::vec(-3.0f64..3.0, n + 1)
            .prop_map(|v| StepPath::from_values(v).unwrap())
    }

    proptest! {
        #[test]
        fn ball_output_in_unit_interval(w in arb_path(12)) {
            let g = BallFunctional::new(0.2, 3.0, 0.6, 0.3, None).unwrap();
            let v = g.eval(&w).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn plateau_laws_exact(w in arb_path(12)) {
            let g = BallFunctional::new(0.2, 3.0, 0.6, 0.3, None).unwrap();
            let h = h_eps_p(&w, g.eps, g.p);
            let v = g.eval(&w).unwrap();
            if h <= g.rho {
                prop_assert_eq!(v, 1.0);
            }
            if h >= g.rho + g.eta {
                prop_assert_eq!(v, 0.0);
            }
        }

        #[test]
        fn h_dominates_eps_and_lp(w in arb_path(12)) {
            let h = h_eps_p(&w, 0.4, 2.5);
            prop_assert!(h >= 0.4 - 1e-12);
            prop_assert!(h >= lp_norm(&w, 2.5) - 1e-12);
        }

        #[test]
        fn h_monotone_in_eps(w in arb_path(12)) {
            prop_assert!(h_eps_p(&w, 0.2, 2.0) <= h_eps_p(&w, 0.5, 2.0) + 1e-12);
        }

        #[test]
        fn minkowski_bound(y in arb_path(10), z in arb_path(10)) {
            // h(y + z) <= h(y) + ||z||_p.
            let p = 2.0;
            let eps = 0.3;
            let sum = StepPath::from_values(
                y.values().iter().zip(z.values()).map(|(a, b)| a + b).collect()
            ).unwrap();
            let lhs = h_eps_p(&sum, eps, p);
            let rhs = h_eps_p(&y, eps, p) + lp_norm(&z, p);
            prop_assert!(lhs <= rhs + 1e-10);
        }
    }
}
