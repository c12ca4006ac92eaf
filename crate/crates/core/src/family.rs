//! Built-in score matrix families, and CSV/JSON matrix input.
//!
//! Generator spec strings: `exceedance:n`, `uniform:n:seed`,
//! `bernoulli:n:p:seed`. File input is either CSV (n rows of n
//! comma-separated reals) or JSON `{"n": .., "a0": [[..]]}`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::matrix::ScoreMatrix;
use crate::{Error, Result};

/// A parsed generator spec.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixFamily {
    /// `a0(i,j) = 1{i <= j}`.
    Exceedance { n: usize },
    /// i.i.d. Uniform(0,1) entries from the given seed.
    Uniform { n: usize, seed: u64 },
    /// i.i.d. Bernoulli(p) entries from the given seed.
    Bernoulli { n: usize, p: f64, seed: u64 },
}

impl MatrixFamily {
    /// Parse `exceedance:n`, `uniform:n:seed`, or `bernoulli:n:p:seed`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let usage = || {
            Error::Parse(format!(
                "'{spec}': expected exceedance:n | uniform:n:seed | bernoulli:n:p:seed"
            ))
        };
        match parts.as_slice() {
            ["exceedance", n] => Ok(Self::Exceedance { n: parse_usize(n, spec)? }),
            ["uniform", n, seed] => Ok(Self::Uniform {
                n: parse_usize(n, spec)?,
                seed: parse_u64(seed, spec)?,
            }),
            ["bernoulli", n, p, seed] => {
                let p = p
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("'{spec}': bad probability '{p}'")))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::RangeError(p));
                }
                Ok(Self::Bernoulli {
                    n: parse_usize(n, spec)?,
                    p,
                    seed: parse_u64(seed, spec)?,
                })
            }
            _ => Err(usage()),
        }
    }

    pub fn n(&self) -> usize {
        match *self {
            Self::Exceedance { n } | Self::Uniform { n, .. } | Self::Bernoulli { n, .. } => n,
        }
    }

    /// Build the (centered) score matrix.
    pub fn build(&self) -> Result<ScoreMatrix> {
        match *self {
            Self::Exceedance { n } => crate::tableaux::exceedance_matrix(n),
            Self::Uniform { n, seed } => {
                if n < 2 {
                    return Err(Error::TooSmall(n));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a0 = (0..n * n).map(|_| rng.random::<f64>()).collect();
                Ok(ScoreMatrix::from_flat(n, a0))
            }
            Self::Bernoulli { n, p, seed } => {
                if n < 2 {
                    return Err(Error::TooSmall(n));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a0 = (0..n * n)
                    .map(|_| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
                    .collect();
                Ok(ScoreMatrix::from_flat(n, a0))
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Self::Exceedance { n } => format!("exceedance:{n}"),
            Self::Uniform { n, seed } => format!("uniform:{n}:{seed}"),
            Self::Bernoulli { n, p, seed } => format!("bernoulli:{n}:{p}:{seed}"),
        }
    }
}

fn parse_usize(v: &str, spec: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| Error::Parse(format!("'{spec}': bad integer '{v}'")))
}

fn parse_u64(v: &str, spec: &str) -> Result<u64> {
    v.parse::<u64>()
        .map_err(|_| Error::Parse(format!("'{spec}': bad seed '{v}'")))
}

/// Parse a CSV matrix: one row per line, n comma-separated reals, blank
/// lines ignored. Errors name the offending row.
pub fn matrix_from_csv(text: &str) -> Result<ScoreMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let row: Vec<f64> = trimmed
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|_| {
                    Error::Parse(format!("row {}: bad number '{}'", lineno + 1, cell.trim()))
                })
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty CSV matrix".into()));
    }
    ScoreMatrix::center_rows(&rows)
}

#[derive(Deserialize)]
struct MatrixJson {
    n: usize,
    a0: Vec<Vec<f64>>,
}

/// Parse a JSON matrix `{"n": .., "a0": [[..]]}`.
pub fn matrix_from_json(text: &str) -> Result<ScoreMatrix> {
    let doc: MatrixJson = serde_json::from_str(text)?;
    if doc.a0.len() != doc.n {
        return Err(Error::NotSquare(format!(
            "declared n={} but a0 has {} rows",
            doc.n,
            doc.a0.len()
        )));
    }
    ScoreMatrix::center_rows(&doc.a0)
}
