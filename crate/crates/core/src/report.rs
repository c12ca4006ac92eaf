//! The JSON result schema shared by all CLI subcommands and the verify
//! suites. Schema version "1"; every document embeds the resolved
//! configuration, the seed, the generator name, and the worker count, so
//! a run can be reproduced from its own output.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::mc::EnsembleStats;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Metadata {
    pub seed: u64,
    pub rng: String,
    pub workers: usize,
    /// Unix seconds; the only field excluded from determinism
    /// comparisons.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

impl Metadata {
    pub fn new(seed: u64, workers: usize) -> Self {
        Self { seed, rng: crate::mc::RNG_NAME.to_string(), workers, timestamp: None }
    }

    pub fn stamped(mut self) -> Self {
        self.timestamp = Some(
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        );
        self
    }
}

/// One verification check: a target value, the estimate, and the
/// tolerance it was held to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub target: f64,
    pub estimate: f64,
    /// Absolute tolerance actually applied.
    pub tolerance: f64,
    /// How the tolerance was derived: "4se", "relative", "absolute",
    /// "exact", "p-value", "bound".
    pub tolerance_kind: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckReport {
    /// Check |estimate - target| <= tolerance.
    pub fn abs(name: impl Into<String>, target: f64, estimate: f64, tolerance: f64, kind: &str) -> Self {
        Self {
            name: name.into(),
            target,
            estimate,
            tolerance,
            tolerance_kind: kind.to_string(),
            pass: (estimate - target).abs() <= tolerance,
            detail: None,
        }
    }

    /// Check a quantity that must be at least `floor` (e.g. a p-value).
    pub fn at_least(name: impl Into<String>, floor: f64, estimate: f64, kind: &str) -> Self {
        Self {
            name: name.into(),
            target: floor,
            estimate,
            tolerance: 0.0,
            tolerance_kind: kind.to_string(),
            pass: estimate >= floor,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

/// A named verification suite's full report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema: String,
    pub suite: String,
    pub config: Value,
    pub metadata: Metadata,
    pub checks: Vec<CheckReport>,
    pub pass: bool,
}

impl SuiteReport {
    pub fn new(suite: &str, config: Value, metadata: Metadata, checks: Vec<CheckReport>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self {
            schema: SCHEMA_VERSION.to_string(),
            suite: suite.to_string(),
            config,
            metadata,
            checks,
            pass,
        }
    }

    /// Render the human-readable table that accompanies the JSON.
    pub fn table(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "suite: {}", self.suite);
        for c in &self.checks {
            let _ = writeln!(
                out,
                "  [{}] {:<44} target {:>13.6e}  estimate {:>13.6e}  tol {:>10.3e} ({})",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.target,
                c.estimate,
                c.tolerance,
                c.tolerance_kind,
            );
        }
        let _ = writeln!(out, "  => {}", if self.pass { "PASS" } else { "FAIL" });
        out
    }
}

/// Ensemble statistics as a JSON value: grid, means, covariance matrix,
/// and standard errors, plus per-functional moments.
pub fn ensemble_json(stats: &EnsembleStats) -> Value {
    let g = stats.grid().len();
    let points = stats.points();
    let means: Vec<f64> = (0..g).map(|j| points.mean(j)).collect();
    let mean_ses: Vec<Value> = (0..g).map(|j| opt(points.mean_se(j))).collect();
    let mut cov = Vec::with_capacity(g);
    let mut cov_se = Vec::with_capacity(g);
    for j in 0..g {
        cov.push((0..g).map(|k| opt(points.covariance(j, k))).collect::<Vec<_>>());
        cov_se.push((0..g).map(|k| opt(points.covariance_se(j, k))).collect::<Vec<_>>());
    }
    let functionals: Vec<Value> = stats
        .functionals()
        .map(|(label, w)| {
            serde_json::json!({
                "label": label,
                "mean": w.mean(),
                "variance": opt(w.variance()),
                "standard_error": opt(w.mean_se()),
            })
        })
        .collect();
    serde_json::json!({
        "samples": stats.count(),
        "grid": stats.grid(),
        "means": means,
        "mean_standard_errors": mean_ses,
        "covariances": cov,
        "covariance_standard_errors": cov_se,
        "functionals": functionals,
    })
}

fn opt(v: Option<f64>) -> Value {
    match v {
        Some(x) => serde_json::json!(x),
        // Below two samples the spread statistics are undefined.
        None => Value::String("insufficient data".to_string()),
    }
}

/// Comparison form of a result document: the parsed JSON with the
/// timestamp field removed. Two runs of the same configuration must
/// agree on this form byte for byte once re-serialized.
pub fn strip_timestamp(doc: &str) -> Result<Value, serde_json::Error> {
    let mut v: Value = serde_json::from_str(doc)?;
    if let Some(meta) = v.get_mut("metadata").and_then(Value::as_object_mut) {
        meta.remove("timestamp");
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_report_pass_logic() {
        assert!(CheckReport::abs("x", 1.0, 1.05, 0.1, "absolute").pass);
        assert!(!CheckReport::abs("x", 1.0, 1.2, 0.1, "absolute").pass);
        assert!(CheckReport::at_least("p", 0.01, 0.5, "p-value").pass);
        assert!(!CheckReport::at_least("p", 0.01, 0.001, "p-value").pass);
    }

    #[test]
    fn suite_pass_is_conjunction() {
        let meta = Metadata::new(1, 1);
        let ok = CheckReport::abs("a", 0.0, 0.0, 0.1, "absolute");
        let bad = CheckReport::abs("b", 0.0, 1.0, 0.1, "absolute");
        let suite = SuiteReport::new("demo", serde_json::json!({}), meta.clone(), vec![ok.clone()]);
        assert!(suite.pass);
        let suite = SuiteReport::new("demo", serde_json::json!({}), meta, vec![ok, bad]);
        assert!(!suite.pass);
        assert!(suite.table().contains("FAIL"));
    }

    #[test]
    fn timestamp_stripping() {
        let a = r#"{"metadata":{"seed":1,"timestamp":100},"x":1}"#;
        let b = r#"{"metadata":{"seed":1,"timestamp":200},"x":1}"#;
        assert_eq!(strip_timestamp(a).unwrap(), strip_timestamp(b).unwrap());
    }
}
