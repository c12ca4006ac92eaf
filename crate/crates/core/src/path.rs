//! Cadlag step paths on `[0,1]` with jumps at grid points `k/n`.

use crate::{Error, Result};

/// A right-continuous step function on `[0,1]`.
///
/// `values[k]` is the value on `[k/n, (k+1)/n)` for `k < n`, and
/// `values[n]` is the value at `t = 1`. Paths built from empty partial
/// sums start at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPath {
    n: usize,
    values: Vec<f64>,
}

/// Map `t` to the grid index `floor(n*t)`, snapping values that sit within
/// one part in 1e9 of a grid point up to it. `t*n` is not exact in binary
/// for most grid times (0.3 * 10 = 2.9999...), and the snap keeps
/// evaluation at nominal grid times exact.
#[inline]
pub fn grid_index(n: usize, t: f64) -> usize {
    let x = t * n as f64;
    let k = (x + 1e-9 * x.abs().max(1.0)) as usize;
    k.min(n)
}

impl StepPath {
    /// Path from `n+1` grid values.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidConfig("step path needs at least one value".into()));
        }
        Ok(Self { n: values.len() - 1, values })
    }

    /// Path of the partial sums `s^{-1} * sum_{i <= k} increments[i]`,
    /// starting at 0.
    pub fn from_increments(increments: &[f64], scale: f64) -> Self {
        let mut values = Vec::with_capacity(increments.len() + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for &d in increments {
            acc += d;
            values.push(acc * scale);
        }
        Self { n: increments.len(), values }
    }

    pub fn zero(n: usize) -> Self {
        Self { n, values: vec![0.0; n + 1] }
    }

    /// Grid resolution: number of steps.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Right-continuous evaluation at `t` in `[0,1]`.
    pub fn eval(&self, t: f64) -> f64 {
        self.values[grid_index(self.n, t)]
    }

    #[inline]
    pub fn value_at(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// Pointwise difference `self - other`; the grids must agree.
    pub fn sub(&self, other: &StepPath) -> Result<StepPath> {
        if self.n != other.n {
            return Err(Error::GridMismatch(self.n, other.n));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(StepPath { n: self.n, values })
    }

    /// Integral of the path over `[0,1]`: the `t = 1` value carries no
    /// mass, each step value holds on an interval of length `1/n`.
    pub fn integral(&self) -> f64 {
        let dt = 1.0 / self.n as f64;
        self.values[..self.n].iter().sum::<f64>() * dt
    }

    /// Supremum of `|path|` over the grid values.
    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation_is_right_continuous() {
        let p = StepPath::from_values(vec![0.0, 1.0, 3.0]).unwrap();
        assert_eq!(p.n(), 2);
        assert_eq!(p.eval(0.0), 0.0);
        assert_eq!(p.eval(0.49), 0.0);
        assert_eq!(p.eval(0.5), 1.0);
        assert_eq!(p.eval(0.99), 1.0);
        assert_eq!(p.eval(1.0), 3.0);
    }

    #[test]
    fn grid_index_snaps_inexact_products() {
        // 0.3 * 10 = 2.9999999999999996 in f64.
        assert_eq!(grid_index(10, 0.3), 3);
        assert_eq!(grid_index(10, 0.299), 2);
        assert_eq!(grid_index(1000, 0.25), 250);
        assert_eq!(grid_index(3, 1.0), 3);
    }

    #[test]
    fn increments_path_starts_at_zero() {
        let p = StepPath::from_increments(&[2.0, -1.0], 0.5);
        assert_eq!(p.values(), &[0.0, 1.0, 0.5]);
    }

    #[test]
    fn sub_requires_matching_grids() {
        let a = StepPath::zero(4);
        let b = StepPath::zero(5);
        assert!(matches!(a.sub(&b), Err(Error::GridMismatch(4, 5))));
    }

    #[test]
    fn integral_ignores_terminal_value() {
        let p = StepPath::from_values(vec![1.0, 1.0, 100.0]).unwrap();
        assert!((p.integral() - 1.0).abs() < 1e-15);
    }
}
