//! Report files: full JSON, accuracy-vs-time CSV and learned-weight summaries.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use pglearn_core::graph::HyperConfig;
use pglearn_core::report::{CurvePoint, RunReport};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Writes `time,best_val_acc,test_acc` rows.
pub fn write_curve_csv(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let to_err = |e: csv::Error| CliError::Csv { path: path.to_path_buf(), message: e.to_string() };
    w.write_record(["time", "best_val_acc", "test_acc"]).map_err(to_err)?;
    for p in curve {
        w.write_record([p.time.to_string(), p.best_val_accuracy.to_string(), p.test_accuracy.to_string()])
            .map_err(to_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Learned weight of one input column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnWeight {
    /// 0-based column index.
    pub column: usize,
    /// Whether the column was injected noise.
    pub noise: bool,
    /// Learned `a_m`.
    pub a: f64,
    /// Bandwidth `σ_m = 1/√a_m`.
    pub sigma: f64,
}

/// Per-column weights of a configuration, split by original and noise columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSummary {
    /// Neighbor count of the configuration.
    pub k: usize,
    /// One entry per column.
    pub columns: Vec<ColumnWeight>,
    /// Mean `a_m` over original columns.
    pub mean_original: f64,
    /// Mean `a_m` over noise columns (`None` without noise metadata).
    pub mean_noise: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Summarizes `config.a` given the injected column indices.
pub fn weight_summary(config: &HyperConfig, noise_columns: &[usize]) -> WeightSummary {
    let columns: Vec<ColumnWeight> = config
        .a
        .iter()
        .enumerate()
        .map(|(m, &a)| ColumnWeight { column: m, noise: noise_columns.contains(&m), a, sigma: 1.0 / a.sqrt() })
        .collect();
    WeightSummary {
        k: config.k,
        mean_original: mean(columns.iter().filter(|c| !c.noise).map(|c| c.a)).unwrap_or(f64::NAN),
        mean_noise: mean(columns.iter().filter(|c| c.noise).map(|c| c.a)),
        columns,
    }
}

/// Writes `column,kind,a,sigma` rows.
pub fn write_weights_csv(path: &Path, summary: &WeightSummary) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let to_err = |e: csv::Error| CliError::Csv { path: path.to_path_buf(), message: e.to_string() };
    w.write_record(["column", "kind", "a", "sigma"]).map_err(to_err)?;
    for c in &summary.columns {
        let kind = if c.noise { "noise" } else { "original" };
        w.write_record([c.column.to_string(), kind.to_string(), c.a.to_string(), c.sigma.to_string()])
            .map_err(to_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes `report.json` and `curve.csv` into `dir`.
pub fn write_run_outputs(dir: &Path, report: &RunReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    crate::io::write_json(&dir.join("report.json"), report)?;
    write_curve_csv(&dir.join("curve.csv"), &report.curve)
}
