//! Limit covariance kernels `sigma(t,u) = f(t^u) - g(t,u)` and the
//! gridded Gaussian sampler built on them.

use std::sync::Arc;

use rand::Rng;

use crate::gaussian::factor::{factorize, SymmetricFactor};
use crate::path::StepPath;
use crate::{Error, Result};

type Func1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type Func2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A limit covariance kernel, either as the closed pair `(f, g)` or as a
/// gridded matrix of `sigma` values.
#[derive(Clone)]
pub enum KernelForm {
    Closed { f: Func1, g: Func2 },
    Gridded { times: Vec<f64>, sigma: Vec<f64> },
}

#[derive(Clone)]
pub struct LimitKernel {
    form: KernelForm,
    /// Regularity exponent for the Fernique-type probe, when known.
    pub beta: Option<f64>,
    /// Constant for the regularity condition at `beta`, when known or
    /// estimated (the probe returns its square).
    pub c_g: Option<f64>,
}

impl std::fmt::Debug for LimitKernel {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.form {
            KernelForm::Closed { .. } => write!(fm, "LimitKernel::Closed"),
            KernelForm::Gridded { times, .. } => {
                write!(fm, "LimitKernel::Gridded({} nodes)", times.len())
            }
        }
    }
}

impl LimitKernel {
    /// Closed-form kernel from `f` and `g`.
    ///
    /// Probes the contract on a 33-point grid: `f(0) = 0`, `f`
    /// nondecreasing, `g` symmetric to 1e-10.
    pub fn closed_form(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        const PROBE: usize = 32;
        if f(0.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("kernel f(0) = {}, want 0", f(0.0))));
        }
        let mut prev = 0.0;
        for k in 0..=PROBE {
            let t = k as f64 / PROBE as f64;
            let v = f(t);
            if v < prev - 1e-12 {
                return Err(Error::InvalidConfig(format!("kernel f decreases at t={t}")));
            }
            prev = v;
            for l in 0..=PROBE {
                let u = l as f64 / PROBE as f64;
                let delta = (g(t, u) - g(u, t)).abs();
                if delta > 1e-10 {
                    return Err(Error::SymmetryViolation { t, u, delta });
                }
            }
        }
        Ok(Self { form: KernelForm::Closed { f: Arc::new(f), g: Arc::new(g) }, beta: None, c_g: None })
    }

    /// Kernel of the exceedance-family limit process:
    /// `f(t) = 3t^2 - 2t^3`, `g(t,u) = 3t^2 u - t^3 - (3/2) t^2 u^2`.
    /// Satisfies the Fernique probe with `beta = 2`.
    pub fn tableau() -> Self {
        let mut k = Self::closed_form(crate::tableaux::limit_f, crate::tableaux::limit_g)
            .expect("tableau kernel satisfies the closed-form contract");
        k.beta = Some(2.0);
        k
    }

    /// Brownian bridge kernel `t^u - tu`, the limit for a constant
    /// alpha.
    pub fn bridge() -> Self {
        let mut k = Self::closed_form(|t| t, |t, u| t * u)
            .expect("bridge kernel satisfies the closed-form contract");
        k.beta = Some(1.0);
        k
    }

    /// Kernel from a gridded `sigma` matrix on the given times.
    pub fn gridded(times: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        let m = times.len();
        if sigma.len() != m * m {
            return Err(Error::InvalidConfig(format!(
                "gridded kernel: {} times but {} matrix entries",
                m,
                sigma.len()
            )));
        }
        for (t, u) in times.iter().zip(times.iter().skip(1)) {
            if u <= t {
                return Err(Error::InvalidConfig("kernel grid times must increase".into()));
            }
        }
        for i in 0..m {
            for j in 0..m {
                let delta = (sigma[i * m + j] - sigma[j * m + i]).abs();
                if delta > 1e-10 {
                    return Err(Error::SymmetryViolation {
                        t: times[i],
                        u: times[j],
                        delta,
                    });
                }
            }
        }
        if times.first() == Some(&0.0) && sigma[0].abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "sigma(0,0) = {}, want 0",
                sigma[0]
            )));
        }
        Ok(Self { form: KernelForm::Gridded { times, sigma }, beta: None, c_g: None })
    }

    /// Parse a kernel spec string: `tableau`, `bridge`, or
    /// `custom-grid:<file.csv>` (resolved by the caller into a gridded
    /// kernel; this only classifies).
    pub fn parse_spec(spec: &str) -> Result<KernelSpec> {
        if spec == "tableau" {
            Ok(KernelSpec::Tableau)
        } else if spec == "bridge" {
            Ok(KernelSpec::Bridge)
        } else if let Some(path) = spec.strip_prefix("custom-grid:") {
            Ok(KernelSpec::CustomGrid(path.to_string()))
        } else {
            Err(Error::Parse(format!(
                "unknown kernel '{spec}'; expected tableau | bridge | custom-grid:file.csv"
            )))
        }
    }

    /// Covariance value `sigma(t, u)`.
    pub fn sigma(&self, t: f64, u: f64) -> Result<f64> {
        match &self.form {
            KernelForm::Closed { f, g } => Ok(f(t.min(u)) - g(t, u)),
            KernelForm::Gridded { times, sigma } => {
                let i = grid_lookup(times, t)?;
                let j = grid_lookup(times, u)?;
                Ok(sigma[i * times.len() + j])
            }
        }
    }

    /// The `g` component, available only for closed-form kernels.
    pub fn g(&self, t: f64, u: f64) -> Result<f64> {
        match &self.form {
            KernelForm::Closed { g, .. } => Ok(g(t, u)),
            KernelForm::Gridded { .. } => Err(Error::InvalidConfig(
                "gridded kernels do not expose g(t,u); use a closed-form kernel".into(),
            )),
        }
    }

    /// Covariance matrix on a set of times, row-major.
    pub fn sigma_on(&self, times: &[f64]) -> Result<Vec<f64>> {
        let m = times.len();
        let mut out = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let v = self.sigma(times[i], times[j])?;
                out[i * m + j] = v;
                out[j * m + i] = v;
            }
        }
        Ok(out)
    }

    /// Fernique-type regularity probe: the supremum over probe pairs of
    /// `|g(t,t) + g(u,u) - 2 g(t,u)| / |u - t|^beta`, a direct estimate
    /// of the squared constant in the condition. Returns infinity when
    /// the ratios keep growing geometrically as the gap shrinks down the
    /// ladder, i.e. when no finite constant works at this `beta`.
    pub fn fernique_check(&self, beta: f64, anchors: usize) -> Result<f64> {
        if !beta.is_finite() || beta <= 0.0 || beta > 2.0 {
            return Err(Error::BadBeta(beta));
        }
        let anchors = anchors.max(4);
        let mut rung_sup = Vec::new();
        for k in 1..=16u32 {
            let h = 0.5f64.powi(k as i32);
            let mut sup = 0.0f64;
            for a in 0..anchors {
                let t = (a as f64 / anchors as f64) * (1.0 - h);
                let u = t + h;
                let num = (self.g(t, t)? + self.g(u, u)? - 2.0 * self.g(t, u)?).abs();
                sup = sup.max(num / h.powf(beta));
            }
            rung_sup.push(sup);
        }
        let overall = rung_sup.iter().cloned().fold(0.0f64, f64::max);
        // Divergence detection: fit the growth exponent of the rung
        // suprema over the finest half of the ladder. A kernel admitting
        // the constant converges (exponent ~ 0 or negative); a kernel
        // that does not grows like h^{-c} for some c > 0.
        let half = rung_sup.len() / 2;
        let (r_mid, r_last) = (rung_sup[half - 1], rung_sup[rung_sup.len() - 1]);
        if r_mid > 0.0 && r_last > 0.0 {
            let rungs = (rung_sup.len() - half) as f64;
            let slope = (r_last / r_mid).ln() / (rungs * std::f64::consts::LN_2);
            if slope > 0.05 {
                return Ok(f64::INFINITY);
            }
        }
        Ok(overall)
    }
}

/// Parsed kernel spec.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Tableau,
    Bridge,
    CustomGrid(String),
}

fn grid_lookup(times: &[f64], t: f64) -> Result<usize> {
    times
        .iter()
        .position(|&x| (x - t).abs() <= 1e-9)
        .ok_or_else(|| Error::InvalidConfig(format!("time {t} not on the kernel grid")))
}

/// Gaussian sampler on a fixed grid: factorization of `sigma(t_i, t_j)`
/// cached at construction, one matrix-vector product per draw.
pub struct GridSampler {
    times: Vec<f64>,
    factor: SymmetricFactor,
}

impl GridSampler {
    /// Build from a kernel and a grid of times. `times` must start at 0
    /// for the sampled vector to extend to a step path; the value at
    /// time 0 is sampled like any other (it is surely 0 when
    /// `sigma(0,0) = 0`).
    pub fn new(kernel: &LimitKernel, times: &[f64]) -> Result<Self> {
        let sigma = kernel.sigma_on(times)?;
        let factor = factorize(&sigma, times.len())?;
        Ok(Self { times: times.to_vec(), factor })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn factor(&self) -> &SymmetricFactor {
        &self.factor
    }

    /// Draw the Gaussian vector on the grid.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut Vec<f64>, out: &mut [f64]) {
        self.factor.sample_into(rng, z, out)
    }

    /// Draw as a step path when the grid is the uniform `k/m` grid.
    pub fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R) -> StepPath {
        let mut z = Vec::new();
        let mut out = vec![0.0; self.times.len()];
        self.factor.sample_into(rng, &mut z, &mut out);
        StepPath::from_values(out).expect("grid is nonempty")
    }
}

/// Uniform grid `0, 1/m, ..., 1`.
pub fn uniform_grid(m: usize) -> Vec<f64> {
    (0..=m).map(|k| k as f64 / m as f64).collect()
}
