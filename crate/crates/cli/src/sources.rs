//! Shared construction of matrices and path sources from CLI flags.

use std::path::Path;
use std::sync::Arc;

use permclt::family::{matrix_from_csv, matrix_from_json, MatrixFamily};
use permclt::gaussian::{
    AlphaFamily, GridSampler, IntegralSampler, KernelSpec, LimitKernel, PreLimitModel,
};
use permclt::matrix::{NormalizationMode, ScoreMatrix};
use permclt::mc::PathSource;
use permclt::{Error, Result};

/// Resolve functional specs, loading ball centers from CSV paths
/// (`center=zero` or absent means the zero path; any other value is a
/// file of `t,value` lines or one value per line).
pub fn resolve_functionals(specs: &[String]) -> Result<Vec<permclt::functionals::PathFunctional>> {
    use permclt::functionals::PathFunctional;
    specs
        .iter()
        .map(|spec| {
            let mut center_file = None;
            let mut rest = Vec::new();
            for part in spec.split(':') {
                if let Some(value) = part.strip_prefix("center=") {
                    if value != "zero" {
                        center_file = Some(value);
                    }
                } else {
                    rest.push(part);
                }
            }
            let parsed = PathFunctional::parse(&rest.join(":"))?;
            match (parsed, center_file) {
                (PathFunctional::Ball(mut ball), Some(path)) => {
                    ball.center = Some(load_path_csv(path)?);
                    Ok(PathFunctional::Ball(ball))
                }
                (other, Some(_)) => Err(Error::InvalidConfig(format!(
                    "'{spec}': only ball functionals take a center file; got {}",
                    other.label()
                ))),
                (parsed, None) => Ok(parsed),
            }
        })
        .collect()
}

/// Load a step path from CSV: `t,value` rows (header allowed) or one
/// value per line; values are the `n+1` grid values.
pub fn load_path_csv(path: &str) -> Result<permclt::StepPath> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let cell = trimmed.rsplit(',').next().unwrap_or(trimmed).trim();
        match cell.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if lineno == 0 => {} // header line
            Err(_) => {
                return Err(Error::Parse(format!("{path}: row {}: bad value '{cell}'", lineno + 1)))
            }
        }
    }
    permclt::StepPath::from_values(values)
}

/// Parse a comma-separated grid of times.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let grid: Vec<f64> = spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad grid time '{}'", s.trim())))
        })
        .collect::<Result<_>>()?;
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty grid".into()));
    }
    Ok(grid)
}

/// Resolve a score matrix from `--family`/`--file` flags.
///
/// `--family` accepts either a full spec string (`exceedance:100`) or a
/// bare family name combined with `--n` (and `--p` for bernoulli);
/// seeded families default their seed to the global one.
pub fn build_matrix(
    family: Option<&str>,
    file: Option<&Path>,
    n: Option<usize>,
    p: Option<f64>,
    seed: u64,
) -> Result<(ScoreMatrix, String)> {
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)?;
        let matrix = if path.extension().is_some_and(|e| e == "json") {
            matrix_from_json(&text)?
        } else {
            matrix_from_csv(&text)?
        };
        return Ok((matrix, path.display().to_string()));
    }
    let family = family.ok_or_else(|| {
        Error::InvalidConfig("a matrix source needs --family or --file".into())
    })?;
    let spec = if family.contains(':') {
        MatrixFamily::parse(family)?
    } else {
        let n = n.ok_or_else(|| {
            Error::InvalidConfig(format!("--family {family} needs --n"))
        })?;
        match family {
            "exceedance" => MatrixFamily::Exceedance { n },
            "uniform" => MatrixFamily::Uniform { n, seed },
            "bernoulli" => MatrixFamily::Bernoulli {
                n,
                p: p.ok_or_else(|| Error::InvalidConfig("--family bernoulli needs --p".into()))?,
                seed,
            },
            other => {
                return Err(Error::Parse(format!(
                    "unknown family '{other}'; expected exceedance | uniform | bernoulli"
                )))
            }
        }
    };
    Ok((spec.build()?, spec.label()))
}

/// Everything needed to assemble one path source.
pub struct SourceSpec<'a> {
    pub source: &'a str,
    pub family: Option<&'a str>,
    pub file: Option<&'a Path>,
    pub kernel: Option<&'a str>,
    pub n: Option<usize>,
    pub mode: &'a str,
    pub grid_size: usize,
    pub cells: usize,
    pub seed: u64,
}

/// Build a path source; returns the source, a display label, and the
/// process grid resolution.
pub fn build_source(spec: &SourceSpec) -> Result<(PathSource, String, usize)> {
    let mode = match spec.mode {
        "tilde" => NormalizationMode::Tilde,
        _ => NormalizationMode::Canonical,
    };
    match spec.source {
        "y" => {
            let (matrix, label) = build_matrix(spec.family, spec.file, spec.n, None, spec.seed)?;
            let norm = matrix.normalization(mode)?;
            let n = matrix.n();
            Ok((
                PathSource::Permutation { matrix: Arc::new(matrix), norm },
                format!("y({label})"),
                n,
            ))
        }
        "tableau" => {
            let n = spec.n.ok_or_else(|| Error::InvalidConfig("--source tableau needs --n".into()))?;
            Ok((PathSource::TableauYhat { n }, format!("tableau-yhat(n={n})"), n))
        }
        "prelimit" | "prelimit-exact" => {
            let (matrix, label) = build_matrix(spec.family, spec.file, spec.n, None, spec.seed)?;
            let norm = matrix.normalization(mode)?;
            let n = matrix.n();
            let model = Arc::new(PreLimitModel::new(Arc::new(matrix), norm));
            if spec.source == "prelimit-exact" {
                Ok((PathSource::PreLimitExact { model }, format!("prelimit-exact({label})"), n))
            } else {
                let factor = Arc::new(model.factorized()?);
                Ok((PathSource::PreLimitFactorized { factor }, format!("prelimit({label})"), n))
            }
        }
        "limit" => {
            let kernel = build_kernel(spec.kernel)?;
            let times = permclt::gaussian::uniform_grid(spec.grid_size);
            let sampler = Arc::new(GridSampler::new(&kernel, &times)?);
            // Surface which PSD regularization the factorization applied.
            let regularization = format!("{:?}", sampler.factor().regularization);
            Ok((
                PathSource::LimitGrid { sampler },
                format!(
                    "limit({}, m={}, regularization={})",
                    spec.kernel.unwrap_or("tableau"),
                    spec.grid_size,
                    regularization
                ),
                spec.grid_size,
            ))
        }
        "limit-integral" => {
            let family = match spec.kernel.unwrap_or("tableau") {
                "tableau" => AlphaFamily::tableau(),
                "bridge" => AlphaFamily::constant_one(),
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "limit-integral supports tableau | bridge alphas, got '{other}'"
                    )))
                }
            };
            let refine = (spec.cells / spec.grid_size).max(1);
            let sampler = Arc::new(IntegralSampler::new(&family, spec.grid_size, refine, spec.cells)?);
            Ok((
                PathSource::LimitIntegral { sampler },
                format!(
                    "limit-integral({}, m={}, cells={})",
                    spec.kernel.unwrap_or("tableau"),
                    spec.grid_size,
                    spec.cells
                ),
                spec.grid_size,
            ))
        }
        other => Err(Error::InvalidConfig(format!(
            "unknown source '{other}'; expected y | tableau | prelimit | prelimit-exact | limit | limit-integral"
        ))),
    }
}

/// Resolve a kernel spec string into a kernel, loading gridded kernels
/// from CSV (first line: times; following lines: sigma matrix rows).
pub fn build_kernel(spec: Option<&str>) -> Result<LimitKernel> {
    match LimitKernel::parse_spec(spec.unwrap_or("tableau"))? {
        KernelSpec::Tableau => Ok(LimitKernel::tableau()),
        KernelSpec::Bridge => Ok(LimitKernel::bridge()),
        KernelSpec::CustomGrid(path) => {
            let text = std::fs::read_to_string(&path)?;
            let mut lines = text.lines().filter(|l| !l.trim().is_empty());
            let times: Vec<f64> = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("{path}: empty kernel file")))?
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("{path}: bad time '{}'", s.trim())))
                })
                .collect::<Result<_>>()?;
            let mut sigma = Vec::with_capacity(times.len() * times.len());
            for (row_no, line) in lines.enumerate() {
                for cell in line.split(',') {
                    sigma.push(cell.trim().parse::<f64>().map_err(|_| {
                        Error::Parse(format!(
                            "{path}: row {}: bad value '{}'",
                            row_no + 2,
                            cell.trim()
                        ))
                    })?);
                }
            }
            LimitKernel::gridded(times, sigma)
        }
    }
}
