//! `permclt`: generate score matrices, simulate permutation-sum and
//! Gaussian processes, and run the verification suites.

mod output;
mod sources;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use permclt::verify::{run_suite, SuiteOptions, SUITES};

#[derive(Parser)]
#[command(name = "permclt", version, about = "Permutation-sum processes, their Gaussian surrogates, and verification suites", max_term_width = 100)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GlobalArgs {
    /// Root seed for all random streams.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (0 = PERMCLT_WORKERS env var, then available
    /// parallelism).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Write the primary output to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<std::path::PathBuf>,

    /// Output format for the primary document.
    #[arg(long, global = true, value_parser = ["json", "csv"], default_value = "json")]
    format: String,

    /// Omit the timestamp field (for byte-identical reruns).
    #[arg(long, global = true, default_value_t = false)]
    no_timestamp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Load or generate a score matrix; emit its centered form,
    /// normalizations, Lyapounov ratios, covariance matrix, and
    /// f_n/g_n grids.
    Matrix(MatrixArgs),
    /// Run a Monte Carlo ensemble of one path source and report grid
    /// statistics and functional expectations.
    Simulate(SimulateArgs),
    /// Run a named verification suite; exit nonzero on failure.
    Verify(VerifyArgs),
    /// Sample Gaussian objects (pre-limit, limit, Kiefer field) and
    /// dump the realizations.
    Gaussian(GaussianArgs),
    /// Per-permutation tableau statistics: exceedance path, boundary,
    /// area, row count.
    Tableaux(TableauxArgs),
    /// Estimate the smooth-functional distance between two path
    /// sources.
    Distance(DistanceArgs),
}

#[derive(Args)]
struct MatrixArgs {
    /// Family spec: `exceedance:n`, `uniform:n:seed`,
    /// `bernoulli:n:p:seed`, or a bare name combined with --n.
    #[arg(long, conflicts_with = "file")]
    family: Option<String>,

    /// Matrix size for bare --family names.
    #[arg(long)]
    n: Option<usize>,

    /// Bernoulli parameter for `--family bernoulli`.
    #[arg(long)]
    p: Option<f64>,

    /// CSV or JSON matrix file (.json decides).
    #[arg(long)]
    file: Option<std::path::PathBuf>,

    /// Normalization mode for the reported sigma matrix and ratios.
    #[arg(long, value_parser = ["canonical", "tilde", "custom"], default_value = "canonical")]
    mode: String,

    /// Normalization factor for --mode custom.
    #[arg(long)]
    s: Option<f64>,

    /// Evaluation grid for f_n/g_n, comma-separated times.
    #[arg(long, default_value = "0,0.25,0.5,0.75,1")]
    grid: String,
}

#[derive(Args)]
struct SimulateArgs {
    /// Path source: y | tableau | prelimit | prelimit-exact | limit |
    /// limit-integral.
    #[arg(long)]
    source: String,

    /// Matrix family spec (for y/prelimit sources).
    #[arg(long)]
    family: Option<String>,

    /// Matrix file (alternative to --family).
    #[arg(long)]
    file: Option<std::path::PathBuf>,

    /// Kernel spec for limit sources: tableau | bridge |
    /// custom-grid:file.csv.
    #[arg(long)]
    kernel: Option<String>,

    /// Process size (matrix n, or tableau n).
    #[arg(long)]
    n: Option<usize>,

    #[arg(long)]
    samples: u64,

    /// Evaluation grid, comma-separated times in the unit interval.
    #[arg(long, default_value = "0.25,0.5,0.75,1")]
    grid: String,

    /// Functional specs, repeatable: `ball:eps=..:p=..:rho=..:eta=..`,
    /// `eval:t=..`, `integral`.
    #[arg(long = "functional")]
    functionals: Vec<String>,

    /// Output grid resolution for limit sources.
    #[arg(long, default_value_t = 32)]
    grid_size: usize,

    /// Integration cells per axis for limit-integral.
    #[arg(long, default_value_t = 256)]
    cells: usize,

    /// Normalization mode for matrix-backed sources.
    #[arg(long, value_parser = ["canonical", "tilde"], default_value = "canonical")]
    mode: String,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite name, or `all`.
    #[arg(long)]
    suite: String,

    #[arg(long)]
    n: Option<usize>,

    #[arg(long)]
    samples: Option<u64>,

    #[arg(long)]
    trials: Option<u32>,

    /// Grid resolution / anchor count where a suite takes one.
    #[arg(long)]
    grid_size: Option<usize>,

    /// Integration cells per axis for the limit suite.
    #[arg(long)]
    cells: Option<usize>,

    /// Suppress the human-readable table on stderr.
    #[arg(long, default_value_t = false)]
    quiet: bool,
}

#[derive(Args)]
struct GaussianArgs {
    /// What to sample: prelimit | limit | limit-integral | kiefer.
    #[arg(long)]
    model: String,

    /// Kernel spec for limit models.
    #[arg(long, default_value = "tableau")]
    kernel: String,

    /// Matrix family for prelimit.
    #[arg(long)]
    family: Option<String>,

    #[arg(long)]
    n: Option<usize>,

    /// Number of realizations to dump.
    #[arg(long, default_value_t = 1)]
    samples: u64,

    /// Grid resolution (paths: steps; kiefer: nodes per axis).
    #[arg(long, default_value_t = 32)]
    grid_size: usize,

    /// Integration cells per axis for limit-integral.
    #[arg(long, default_value_t = 256)]
    cells: usize,
}

#[derive(Args)]
struct TableauxArgs {
    #[arg(long)]
    n: usize,

    /// Permutation choice: random | identity | reversal.
    #[arg(long, default_value = "random")]
    perm: String,

    /// With --perm random, how many records to summarize (the first
    /// one's boundary is dumped).
    #[arg(long, default_value_t = 1)]
    samples: u64,
}

#[derive(Args)]
struct DistanceArgs {
    /// Functional spec evaluated under both sources.
    #[arg(long)]
    functional: String,

    /// First source: y | tableau | prelimit | prelimit-exact | limit |
    /// limit-integral.
    #[arg(long)]
    source_a: String,

    /// Second source.
    #[arg(long)]
    source_b: String,

    #[arg(long)]
    family: Option<String>,

    #[arg(long)]
    file: Option<std::path::PathBuf>,

    #[arg(long)]
    kernel: Option<String>,

    #[arg(long)]
    n: Option<usize>,

    #[arg(long)]
    samples: u64,

    #[arg(long, default_value = "0.25,0.5,0.75,1")]
    grid: String,

    #[arg(long, default_value_t = 32)]
    grid_size: usize,

    #[arg(long, default_value_t = 256)]
    cells: usize,

    #[arg(long, value_parser = ["canonical", "tilde"], default_value = "canonical")]
    mode: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> permclt::Result<ExitCode> {
    let global = cli.global.clone();
    match cli.command {
        Command::Matrix(args) => {
            let doc = commands::matrix(&args, &global)?;
            output::emit(&global, &doc)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate(args) => {
            let doc = commands::simulate(&args, &global)?;
            output::emit(&global, &doc)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(args) => {
            let suites: Vec<String> = if args.suite == "all" {
                SUITES.iter().map(|s| s.to_string()).collect()
            } else {
                vec![args.suite.clone()]
            };
            let opts = SuiteOptions {
                n: args.n,
                samples: args.samples,
                trials: args.trials,
                seed: if global.seed == 0 { None } else { Some(global.seed) },
                workers: global.workers,
                grid_points: args.grid_size,
                cells: args.cells,
            };
            let mut reports = Vec::new();
            let mut all_pass = true;
            for name in &suites {
                let mut report = run_suite(name, &opts)?;
                if !global.no_timestamp {
                    report.metadata = report.metadata.stamped();
                }
                if !args.quiet {
                    eprint!("{}", report.table());
                }
                all_pass &= report.pass;
                reports.push(report);
            }
            let doc = if reports.len() == 1 {
                output::verify_doc(&reports[0], &global)
            } else {
                output::verify_all_doc(&reports, &global)
            };
            output::emit(&global, &doc)?;
            Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Gaussian(args) => {
            let doc = commands::gaussian(&args, &global)?;
            output::emit(&global, &doc)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Tableaux(args) => {
            let doc = commands::tableaux(&args, &global)?;
            output::emit(&global, &doc)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Distance(args) => {
            let doc = commands::distance(&args, &global)?;
            output::emit(&global, &doc)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

mod commands {
    use super::*;
    use output::Document;
    use permclt::gaussian::{sample_kiefer, uniform_grid};
    use permclt::matrix::{Normalization, NormalizationMode};
    use permclt::mc::{self, run_ensemble, substream, RunConfig};
    use permclt::perm::Permutation;
    use permclt::report::{ensemble_json, Metadata, SCHEMA_VERSION};
    use permclt::tableaux::ExceedanceRecord;
    use permclt::{Error, Result};
    use serde_json::json;
    use sources::{build_matrix, build_source, parse_grid, SourceSpec};

    fn meta(global: &GlobalArgs) -> serde_json::Value {
        let m = Metadata::new(global.seed, global.workers);
        let m = if global.no_timestamp { m } else { m.stamped() };
        serde_json::to_value(m).expect("metadata serializes")
    }

    pub fn matrix(args: &MatrixArgs, global: &GlobalArgs) -> Result<Document> {
        let (matrix, label) = build_matrix(
            args.family.as_deref(),
            args.file.as_deref(),
            args.n,
            args.p,
            global.seed,
        )?;
        let norm = match args.mode.as_str() {
            "canonical" => matrix.normalization(NormalizationMode::Canonical)?,
            "tilde" => matrix.normalization(NormalizationMode::Tilde)?,
            "custom" => Normalization::custom(args.s.ok_or_else(|| {
                Error::InvalidConfig("--mode custom requires --s".into())
            })?)?,
            _ => unreachable!("clap validates the mode"),
        };
        let grid = parse_grid(&args.grid)?;
        let n = matrix.n();
        let canonical = matrix.normalization(NormalizationMode::Canonical).ok();
        let tilde = matrix.normalization(NormalizationMode::Tilde).ok();
        let lambda = matrix.lyapounov_ratio(&norm);
        let lambda_tilde = matrix.lyapounov_ratio_tilde().ok();
        let sigma = matrix.sigma_matrix(&norm);
        let fg = matrix.empirical_fn_gn(&norm, &grid);
        let g_len = grid.len();
        let centered: Vec<Vec<f64>> = (0..n).map(|i| matrix.row(i).to_vec()).collect();
        let sigma_rows: Vec<Vec<f64>> =
            (0..n).map(|i| (0..n).map(|j| sigma.get(i, j)).collect()).collect();
        let g_rows: Vec<Vec<f64>> =
            (0..g_len).map(|x| fg.g[x * g_len..(x + 1) * g_len].to_vec()).collect();
        let json = json!({
            "schema": SCHEMA_VERSION,
            "command": "matrix",
            "config": {
                "family": label,
                "mode": args.mode,
                "grid": grid,
            },
            "metadata": meta(global),
            "n": n,
            "normalization": {
                "mode": args.mode,
                "s": norm.s,
                "s_canonical": canonical.map(|c| c.s),
                "s_tilde": tilde.map(|t| t.s),
            },
            "lyapounov": lambda,
            "lyapounov_sqrt_n": lambda * (n as f64).sqrt(),
            "lyapounov_tilde": lambda_tilde,
            "grand_mean": matrix.grand_mean(),
            "centered": centered,
            "sigma": sigma_rows,
            "fn": fg.f,
            "gn": g_rows,
        });
        // CSV alternative: the centered matrix.
        let mut csv = String::new();
        for i in 0..n {
            let row: Vec<String> = matrix.row(i).iter().map(|v| format!("{v}")).collect();
            csv.push_str(&row.join(","));
            csv.push('\n');
        }
        Ok(Document { json, csv })
    }

    pub fn simulate(args: &SimulateArgs, global: &GlobalArgs) -> Result<Document> {
        let grid = parse_grid(&args.grid)?;
        let functionals = sources::resolve_functionals(&args.functionals)?;
        let spec = SourceSpec {
            source: &args.source,
            family: args.family.as_deref(),
            file: args.file.as_deref(),
            kernel: args.kernel.as_deref(),
            n: args.n,
            mode: &args.mode,
            grid_size: args.grid_size,
            cells: args.cells,
            seed: global.seed,
        };
        let (source, source_label, n) = build_source(&spec)?;
        let cfg = RunConfig {
            n,
            samples: args.samples,
            seed: global.seed,
            workers: global.workers,
            grid: grid.clone(),
            functionals,
        };
        let stats = run_ensemble(&cfg, &source)?;
        let json = json!({
            "schema": SCHEMA_VERSION,
            "command": "simulate",
            "config": {
                "source": args.source,
                "source_label": source_label,
                "family": args.family,
                "kernel": args.kernel,
                "mode": args.mode,
                "n": n,
                "samples": args.samples,
                "grid": grid,
                "grid_size": args.grid_size,
                "cells": args.cells,
                "functionals": args.functionals,
            },
            "metadata": meta(global),
            "results": ensemble_json(&stats),
            "tests": [],
        });
        // CSV alternative: the covariance table.
        let mut csv = String::from("t,u,covariance,standard_error\n");
        for j in 0..grid.len() {
            for k in 0..grid.len() {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    grid[j],
                    grid[k],
                    stats.points().covariance(j, k).map(|v| v.to_string()).unwrap_or_default(),
                    stats.points().covariance_se(j, k).map(|v| v.to_string()).unwrap_or_default(),
                ));
            }
        }
        Ok(Document { json, csv })
    }

    pub fn gaussian(args: &GaussianArgs, global: &GlobalArgs) -> Result<Document> {
        let mut csv = String::new();
        let json = match args.model.as_str() {
            "kiefer" => {
                let grid = uniform_grid(args.grid_size);
                let mut fields = Vec::new();
                for i in 0..args.samples {
                    let mut rng = substream(global.seed, i);
                    let field = sample_kiefer(&grid, &grid, &mut rng)?;
                    if i == 0 {
                        csv.push_str("v,w,value\n");
                        for (a, &v) in grid.iter().enumerate() {
                            for (b, &w) in grid.iter().enumerate() {
                                csv.push_str(&format!("{v},{w},{}\n", field.value(a, b)));
                            }
                        }
                    }
                    let rows: Vec<Vec<f64>> = (0..grid.len())
                        .map(|a| (0..grid.len()).map(|b| field.value(a, b)).collect())
                        .collect();
                    fields.push(rows);
                }
                json!({
                    "schema": SCHEMA_VERSION,
                    "command": "gaussian",
                    "config": {"model": "kiefer", "grid_size": args.grid_size, "samples": args.samples},
                    "metadata": meta(global),
                    "grid": grid,
                    "fields": fields,
                })
            }
            model @ ("prelimit" | "prelimit-exact" | "limit" | "limit-integral") => {
                let spec = SourceSpec {
                    source: if model == "prelimit" { "prelimit-exact" } else { model },
                    family: args.family.as_deref(),
                    file: None,
                    kernel: Some(&args.kernel),
                    n: args.n,
                    mode: "canonical",
                    grid_size: args.grid_size,
                    cells: args.cells,
                    seed: global.seed,
                };
                let (source, label, n) = build_source(&spec)?;
                let mut scratch = mc::SourceScratch::default();
                let mut paths = Vec::new();
                for i in 0..args.samples {
                    let mut rng = substream(global.seed, i);
                    let path = source.draw(&mut rng, &mut scratch);
                    if i == 0 {
                        csv.push_str("t,value\n");
                        let steps = path.n();
                        for (k, &v) in path.values().iter().enumerate() {
                            csv.push_str(&format!("{},{v}\n", k as f64 / steps as f64));
                        }
                    }
                    paths.push(path.values().to_vec());
                }
                json!({
                    "schema": SCHEMA_VERSION,
                    "command": "gaussian",
                    "config": {"model": label, "n": n, "samples": args.samples},
                    "metadata": meta(global),
                    "paths": paths,
                })
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown model '{other}'; expected prelimit | limit | limit-integral | kiefer"
                )))
            }
        };
        Ok(Document { json, csv })
    }

    pub fn tableaux(args: &TableauxArgs, global: &GlobalArgs) -> Result<Document> {
        let first_perm = |rng_index: u64| -> Result<Permutation> {
            match args.perm.as_str() {
                "identity" => Ok(Permutation::identity(args.n)),
                "reversal" => Ok(Permutation::reversal(args.n)),
                "random" => {
                    let mut rng = substream(global.seed, rng_index);
                    Ok(Permutation::random(args.n, &mut rng))
                }
                other => Err(Error::InvalidConfig(format!(
                    "unknown permutation '{other}'; expected random | identity | reversal"
                ))),
            }
        };
        let mut areas = Vec::new();
        let mut rows_counts = Vec::new();
        let mut first_record = None;
        for i in 0..args.samples.max(1) {
            let pi = first_perm(i)?;
            let rec = ExceedanceRecord::from_permutation(&pi);
            areas.push(rec.area());
            rows_counts.push(rec.row_count());
            if first_record.is_none() {
                first_record = Some(rec);
            }
        }
        let rec = first_record.expect("at least one record");
        let boundary = rec.boundary();
        let mut csv = String::from("x,y\n");
        for &(x, y) in boundary.points() {
            csv.push_str(&format!("{x},{y}\n"));
        }
        let json = json!({
            "schema": SCHEMA_VERSION,
            "command": "tableaux",
            "config": {"n": args.n, "perm": args.perm, "samples": args.samples},
            "metadata": meta(global),
            "first": {
                "indicators": rec.indicators().iter().map(|&b| u8::from(b)).collect::<Vec<_>>(),
                "s0": rec.s0(),
                "area": rec.area(),
                "row_count": rec.row_count(),
                "boundary": boundary.points(),
                "parabola_sup_distance": boundary.sup_distance_to_parabola(),
            },
            "areas": areas,
            "row_counts": rows_counts,
        });
        Ok(Document { json, csv })
    }

    pub fn distance(args: &DistanceArgs, global: &GlobalArgs) -> Result<Document> {
        let functional = sources::resolve_functionals(std::slice::from_ref(&args.functional))?
            .pop()
            .expect("one spec in, one functional out");
        let label = functional.label();
        let grid = parse_grid(&args.grid)?;
        let make = |source: &str| -> Result<_> {
            let spec = SourceSpec {
                source,
                family: args.family.as_deref(),
                file: args.file.as_deref(),
                kernel: args.kernel.as_deref(),
                n: args.n,
                mode: &args.mode,
                grid_size: args.grid_size,
                cells: args.cells,
                seed: global.seed,
            };
            build_source(&spec)
        };
        let (source_a, label_a, n) = make(&args.source_a)?;
        let (source_b, label_b, _) = make(&args.source_b)?;
        let cfg = RunConfig {
            n,
            samples: args.samples,
            seed: global.seed,
            workers: global.workers,
            grid,
            functionals: vec![functional],
        };
        let d = mc::distance_estimate(&cfg, &label, &source_a, &source_b)?;
        let json = json!({
            "schema": SCHEMA_VERSION,
            "command": "distance",
            "config": {
                "functional": label,
                "source_a": label_a,
                "source_b": label_b,
                "n": n,
                "samples": args.samples,
            },
            "metadata": meta(global),
            "mean_a": d.mean_a,
            "mean_b": d.mean_b,
            "delta": d.delta,
            "standard_error": d.se,
            "ci95": [d.ci95.0, d.ci95.1],
        });
        let csv = format!(
            "mean_a,mean_b,delta,standard_error,ci_low,ci_high\n{},{},{},{},{},{}\n",
            d.mean_a, d.mean_b, d.delta, d.se, d.ci95.0, d.ci95.1
        );
        Ok(Document { json, csv })
    }
}
