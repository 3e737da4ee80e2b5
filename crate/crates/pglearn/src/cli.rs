//! Command-line interface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pglearn_core::dataset::{inject_noise_features, sample_split};
use pglearn_core::graph::{build_knn_graph, HyperConfig};
use pglearn_core::optimizer::{OptimizerSettings, Problem, Refit};
use pglearn_core::propagation::SolverSettings;
use pglearn_core::report::RunReport;
use pglearn_core::scheduler::TimeUnit;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::io::{read_dataset, read_json, read_split, write_dataset, write_edge_list, write_json, CsvOptions, HeaderMode, LabelColumn, NoiseMetadata};
use crate::output::{weight_summary, write_curve_csv, write_weights_csv};
use crate::runspec::{execute, Method, RunSpec, SplitSource};

/// Graph structure learning for graph-based semi-supervised classification.
#[derive(Debug, Parser)]
#[command(name = "pglearn", version)]
pub struct Cli {
    /// Subcommand.
    #[command(subcommand)]
    pub command: Command,
}

/// Subcommands.
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a labeled/validation/test split.
    Split(SplitArgs),
    /// Append standard normal noise columns.
    InjectNoise(NoiseArgs),
    /// Run a hyperparameter search.
    Run(RunArgs),
    /// Refit the best configuration with validation labels and report test accuracy.
    Evaluate(EvaluateArgs),
    /// Export accuracy-vs-time and learned-weight tables from a report.
    Report(ReportArgs),
}

/// Dataset location and CSV layout.
#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Label column name or 0-based position (default: last column).
    #[arg(long)]
    pub label_column: Option<String>,
    /// Treat the first row as data even if it is not numeric.
    #[arg(long, conflicts_with = "header")]
    pub no_header: bool,
    /// Treat the first row as a header.
    #[arg(long)]
    pub header: bool,
}

impl DatasetArgs {
    fn options(&self) -> CsvOptions {
        CsvOptions {
            label: self.label_column.as_deref().map_or(LabelColumn::Last, LabelColumn::parse),
            header: if self.header {
                HeaderMode::Present
            } else if self.no_header {
                HeaderMode::Absent
            } else {
                HeaderMode::Auto
            },
        }
    }
}

/// `split` arguments.
#[derive(Debug, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Fraction of points that are labeled.
    #[arg(long, default_value_t = 0.1)]
    labeled_fraction: f64,
    /// Fraction of labeled points held out for validation.
    #[arg(long, default_value_t = 0.5)]
    validation_fraction: f64,
    /// Seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output split JSON.
    #[arg(long)]
    out: PathBuf,
}

/// `inject-noise` arguments.
#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Number of noise columns as a fraction of the original column count.
    #[arg(long, default_value_t = 1.0)]
    fraction: f64,
    /// Seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
    /// Output metadata JSON (default: `<out>.noise.json`).
    #[arg(long)]
    meta: Option<PathBuf>,
}

/// `run` arguments.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// Re-run a saved run specification; other flags are ignored.
    #[arg(long, conflicts_with_all = ["dataset", "split"])]
    spec: Option<PathBuf>,
    /// Dataset CSV.
    #[arg(long, required_unless_present = "spec")]
    dataset: Option<PathBuf>,
    /// Label column name or 0-based position (default: last column).
    #[arg(long)]
    label_column: Option<String>,
    /// Noise metadata from `inject-noise`.
    #[arg(long)]
    noise: Option<PathBuf>,
    /// Split JSON; sampled from the seed when absent.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Labeled fraction when sampling the split.
    #[arg(long, default_value_t = 0.1)]
    labeled_fraction: f64,
    /// Validation fraction when sampling the split.
    #[arg(long, default_value_t = 0.5)]
    validation_fraction: f64,
    /// Search method.
    #[arg(long, value_enum, default_value_t = Method::PgLearn)]
    method: Method,
    /// Budget `B` in time units.
    #[arg(long, default_value_t = 16)]
    budget: u64,
    /// Downsampling rate `r`.
    #[arg(long, default_value_t = 2)]
    rate: u64,
    /// Thread count `T`.
    #[arg(long, default_value_t = 8)]
    threads: usize,
    /// Time unit: `iters:U` or `seconds:S`.
    #[arg(long, default_value = "iters:4", value_parser = parse_unit)]
    unit: TimeUnit,
    /// Diffusion damping `μ`.
    #[arg(long, default_value_t = 0.99)]
    mu: f64,
    /// Relative step size `γ`.
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    /// Smallest neighbor count.
    #[arg(long, default_value_t = 5)]
    k_min: usize,
    /// Largest neighbor count.
    #[arg(long, default_value_t = 20)]
    k_max: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// `evaluate` arguments.
#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Split JSON.
    #[arg(long)]
    split: PathBuf,
    /// Run report whose best configuration is refitted.
    #[arg(long, required_unless_present = "config")]
    report: Option<PathBuf>,
    /// Configuration JSON `{"k": .., "a": [..]}` instead of a report.
    #[arg(long, conflicts_with = "report")]
    config: Option<PathBuf>,
    /// Diffusion damping `μ`.
    #[arg(long, default_value_t = 0.99)]
    mu: f64,
    /// Also write the graph as an `i j w` edge list.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Write the result JSON here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// `report` arguments.
#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run report JSON.
    #[arg(long)]
    report: PathBuf,
    /// Noise metadata from `inject-noise`.
    #[arg(long)]
    noise: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

/// Parses `iters:U`, `seconds:S` or bare `seconds`.
pub fn parse_unit(s: &str) -> std::result::Result<TimeUnit, String> {
    let (kind, value) = s.split_once(':').unwrap_or((s, ""));
    match kind {
        "iters" | "iterations" => {
            let u: u64 = value.parse().map_err(|_| format!("bad iteration count in '{s}'"))?;
            if u == 0 {
                return Err("iteration unit must be >= 1".into());
            }
            Ok(TimeUnit::Iterations(u))
        }
        "seconds" | "secs" => {
            let v: f64 = if value.is_empty() { 1.0 } else { value.parse().map_err(|_| format!("bad seconds in '{s}'"))? };
            if !(v > 0.0 && v.is_finite()) {
                return Err("seconds unit must be > 0".into());
            }
            Ok(TimeUnit::Seconds(v))
        }
        _ => Err(format!("unit '{s}' is not iters:U or seconds:S")),
    }
}

/// Output of `evaluate`.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluateOutput {
    /// Refit result.
    #[serde(flatten)]
    pub refit: Refit,
    /// Method of the report the configuration came from.
    pub method: Option<String>,
}

/// Runs a parsed command and returns the text for stdout.
pub fn dispatch(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Split(a) => cmd_split(a),
        Command::InjectNoise(a) => cmd_inject_noise(a),
        Command::Run(a) => cmd_run(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn cmd_split(a: SplitArgs) -> Result<String> {
    let ds = read_dataset(&a.data.dataset, &a.data.options())?;
    let split = sample_split(&ds, a.labeled_fraction, a.validation_fraction, a.seed)?;
    write_json(&a.out, &split)?;
    Ok(serde_json::json!({
        "labeled": split.labeled.len(),
        "validation": split.validation.len(),
        "unlabeled": split.unlabeled.len(),
        "out": a.out,
    })
    .to_string())
}

fn cmd_inject_noise(a: NoiseArgs) -> Result<String> {
    let ds = read_dataset(&a.data.dataset, &a.data.options())?;
    let noisy = inject_noise_features(&ds, a.fraction, a.seed)?;
    write_dataset(&a.out, &noisy)?;
    let meta = NoiseMetadata {
        original_columns: ds.d(),
        noise_columns: noisy.noise_columns().to_vec(),
        noise_fraction: a.fraction,
        seed: a.seed,
    };
    let meta_path = a.meta.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".noise.json");
        p.into()
    });
    write_json(&meta_path, &meta)?;
    Ok(serde_json::json!({ "columns": noisy.d(), "noise_columns": meta.noise_columns, "meta": meta_path }).to_string())
}

fn run_spec_from(a: RunArgs) -> Result<RunSpec> {
    if let Some(path) = a.spec {
        return read_json(&path);
    }
    let dataset = a.dataset.ok_or_else(|| CliError::Invalid("--dataset is required".into()))?;
    let out = a.out.ok_or_else(|| CliError::Invalid("--out is required".into()))?;
    let split = match a.split {
        Some(p) => SplitSource::File(p),
        None => SplitSource::Sample {
            labeled_fraction: a.labeled_fraction,
            validation_fraction: a.validation_fraction,
        },
    };
    let optimizer = OptimizerSettings {
        gamma: a.gamma,
        solver: SolverSettings { mu: a.mu, ..SolverSettings::default() },
        ..OptimizerSettings::default()
    };
    if !(a.gamma > 0.0 && a.gamma.is_finite()) {
        return Err(CliError::Invalid(format!("gamma={} must be > 0", a.gamma)));
    }
    Ok(RunSpec {
        dataset,
        label_column: a.label_column,
        noise: a.noise,
        split,
        method: a.method,
        budget: a.budget,
        rate: a.rate,
        threads: a.threads,
        unit: a.unit,
        optimizer,
        k_min: a.k_min,
        k_max: a.k_max,
        seed: a.seed,
        out,
    })
}

fn cmd_run(a: RunArgs) -> Result<String> {
    let spec = run_spec_from(a)?;
    let report = execute(&spec)?;
    let best = &report.best.evaluation;
    Ok(serde_json::json!({
        "method": report.method,
        "configs": report.configs.len(),
        "work": report.work,
        "best": { "k": best.config.k, "a": best.config.a, "loss": best.loss,
                  "val_accuracy": best.val_accuracy, "test_accuracy": best.test_accuracy },
        "out": spec.out,
    })
    .to_string())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<String> {
    let ds = read_dataset(&a.data.dataset, &a.data.options())?;
    let split = read_split(&a.split, &ds)?;
    let (config, method) = match (&a.report, &a.config) {
        (Some(p), _) => {
            let r: RunReport = read_json(p)?;
            (r.best.evaluation.config, Some(r.method))
        }
        (None, Some(p)) => (read_json::<HyperConfig>(p)?, None),
        (None, None) => return Err(CliError::Invalid("either --report or --config is required".into())),
    };
    if config.a.len() != ds.d() {
        return Err(CliError::Invalid(format!(
            "configuration has {} weights, dataset has {} features",
            config.a.len(),
            ds.d()
        )));
    }
    let problem = Problem::new(&ds, &split)?;
    let solver = SolverSettings { mu: a.mu, ..SolverSettings::default() };
    let refit = problem.refit(&config, &solver)?;
    if let Some(path) = &a.edges {
        write_edge_list(path, &build_knn_graph(&ds, &config)?)?;
    }
    let out = EvaluateOutput { refit, method };
    if let Some(path) = &a.out {
        write_json(path, &out)?;
    }
    Ok(serde_json::to_string(&out).expect("serializable"))
}

fn cmd_report(a: ReportArgs) -> Result<String> {
    let report: RunReport = read_json(&a.report)?;
    let noise: Vec<usize> = match &a.noise {
        Some(p) => read_json::<NoiseMetadata>(p)?.noise_columns,
        None => Vec::new(),
    };
    let config = &report.best.evaluation.config;
    if let Some(&bad) = noise.iter().find(|&&m| m >= config.a.len()) {
        return Err(CliError::Invalid(format!("noise column {bad} outside the {} learned weights", config.a.len())));
    }
    std::fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    write_curve_csv(&a.out.join("curve.csv"), &report.curve)?;
    let summary = weight_summary(config, &noise);
    write_weights_csv(&a.out.join("weights.csv"), &summary)?;
    write_json(&a.out.join("weights.json"), &summary)?;
    Ok(serde_json::json!({
        "curve_points": report.curve.len(),
        "mean_original": summary.mean_original,
        "mean_noise": summary.mean_noise,
        "out": a.out,
    })
    .to_string())
}
