//! Serializable description of a search run and its execution.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use pglearn_core::baselines::{grid_search, random_search_d};
use pglearn_core::dataset::{sample_split, Dataset, SplitSpec};
use pglearn_core::optimizer::{Iterations, OptimizerSettings, Problem, SearchSpace};
use pglearn_core::report::RunReport;
use pglearn_core::scheduler::{pg_learn, SchedulerConfig, TimeUnit};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{read_dataset, read_json, read_split, CsvOptions, HeaderMode, LabelColumn, NoiseMetadata};
use crate::workers::{with_thread_pool, Deadline};

/// Search method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Parallel successive halving over gradient runs.
    PgLearn,
    /// A single gradient run (one thread).
    Gradient,
    /// Coarse-to-fine grid over `(k, σ)`.
    Grid,
    /// Random `(k, a_1..a_d)` configurations.
    Random,
}

/// Where the split comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSource {
    /// A split JSON file.
    File(PathBuf),
    /// Sampled with the run seed.
    Sample {
        /// Fraction of all points that are labeled.
        labeled_fraction: f64,
        /// Fraction of labeled points held out for validation.
        validation_fraction: f64,
    },
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    /// Dataset CSV.
    pub dataset: PathBuf,
    /// Label column selector (name or 0-based position); last column when absent.
    pub label_column: Option<String>,
    /// Optional noise metadata written by `inject-noise`.
    pub noise: Option<PathBuf>,
    /// Split.
    pub split: SplitSource,
    /// Search method.
    pub method: Method,
    /// Budget `B` in time units.
    pub budget: u64,
    /// Downsampling rate `r`.
    pub rate: u64,
    /// Thread count `T`.
    pub threads: usize,
    /// Time unit.
    pub unit: TimeUnit,
    /// Optimizer and solver settings.
    pub optimizer: OptimizerSettings,
    /// Smallest neighbor count.
    pub k_min: usize,
    /// Largest neighbor count.
    pub k_max: usize,
    /// Master seed.
    pub seed: u64,
    /// Output directory.
    pub out: PathBuf,
}

impl RunSpec {
    /// CSV options implied by `label_column`.
    pub fn csv_options(&self) -> CsvOptions {
        CsvOptions {
            label: self.label_column.as_deref().map_or(LabelColumn::Last, LabelColumn::parse),
            header: HeaderMode::Auto,
        }
    }

    /// Loads the dataset (with noise columns when metadata is given).
    pub fn load_dataset(&self) -> Result<Dataset> {
        let mut ds = read_dataset(&self.dataset, &self.csv_options())?;
        if let Some(path) = &self.noise {
            let meta: NoiseMetadata = read_json(path)?;
            if meta.original_columns + meta.noise_columns.len() != ds.d() {
                return Err(CliError::Invalid(format!(
                    "{}: metadata describes {} columns, dataset has {}",
                    path.display(),
                    meta.original_columns + meta.noise_columns.len(),
                    ds.d()
                )));
            }
            ds.set_noise_columns(meta.noise_columns)?;
        }
        Ok(ds)
    }

    /// Reads or samples the split.
    pub fn load_split(&self, dataset: &Dataset) -> Result<SplitSpec> {
        match &self.split {
            SplitSource::File(path) => read_split(path, dataset),
            SplitSource::Sample { labeled_fraction, validation_fraction } => {
                Ok(sample_split(dataset, *labeled_fraction, *validation_fraction, self.seed)?)
            }
        }
    }

    /// Scheduler configuration (`T = 1` for the single gradient run).
    pub fn scheduler(&self) -> SchedulerConfig {
        let threads = if self.method == Method::Gradient { 1 } else { self.threads };
        SchedulerConfig { budget: self.budget, rate: self.rate, threads, unit: self.unit, seed: self.seed }
    }
}

/// Runs the configured method on an already loaded problem.
///
/// Baselines get `T·B·U` evaluations in iteration mode and `T·B` units of
/// wall-clock time otherwise.
pub fn run_method(spec: &RunSpec, dataset: &Dataset, split: &SplitSpec) -> Result<RunReport> {
    let problem = Problem::new(dataset, split)?;
    let space = SearchSpace::with_k_range(dataset, spec.k_min, spec.k_max, spec.seed)?;
    let sched = spec.scheduler();
    sched.check()?;
    let settings = spec.optimizer;
    settings.solver.check()?;
    let started = Instant::now();
    let mut report = match spec.method {
        Method::PgLearn | Method::Gradient => {
            with_thread_pool(&problem, settings, sched.threads, |w| pg_learn(&problem, &space, &settings, &sched, w))?
        }
        Method::Grid | Method::Random => {
            let run = |budget: &mut dyn pglearn_core::optimizer::StepBudget| match spec.method {
                Method::Grid => grid_search(&problem, &space, &settings, budget),
                _ => random_search_d(&problem, &space, &settings, budget, spec.seed),
            };
            match (sched.total_steps(), sched.unit) {
                (Some(n), _) => run(&mut Iterations(n))?,
                (None, TimeUnit::Seconds(s)) => {
                    let total = s * (sched.threads as u64 * sched.budget) as f64;
                    run(&mut Deadline::after(Duration::from_secs_f64(total)))?
                }
                (None, TimeUnit::Iterations(_)) => unreachable!("iteration units always have a step total"),
            }
        }
    };
    report.elapsed_seconds = Some(started.elapsed().as_secs_f64());
    Ok(report)
}

/// Loads inputs, runs, and writes `report.json`, `curve.csv`, `split.json`
/// and `runspec.json` into `spec.out`.
pub fn execute(spec: &RunSpec) -> Result<RunReport> {
    let dataset = spec.load_dataset()?;
    let split = spec.load_split(&dataset)?;
    let report = run_method(spec, &dataset, &split)?;
    write_outputs(&spec.out, spec, &split, &report)?;
    Ok(report)
}

fn write_outputs(dir: &Path, spec: &RunSpec, split: &SplitSpec, report: &RunReport) -> Result<()> {
    crate::output::write_run_outputs(dir, report)?;
    crate::io::write_json(&dir.join("split.json"), split)?;
    crate::io::write_json(&dir.join("runspec.json"), spec)
}
