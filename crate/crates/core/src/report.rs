//! Run reports shared by the scheduler and the baselines.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::graph::HyperConfig;
use crate::optimizer::{Evaluation, HistoryEntry, Status};

/// One examined configuration and everything recorded about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    /// Sequential id in order of creation.
    pub id: usize,
    /// Thread that ran it.
    pub thread: usize,
    /// Round in which it was started (0 = initial leg).
    pub origin_round: u32,
    /// Configuration at creation.
    pub initial: HyperConfig,
    /// Configuration after its last step.
    pub current: HyperConfig,
    /// Per-iteration trace.
    pub trace: Vec<TracePoint>,
    /// Checkpoint at which it was eliminated, if any.
    pub eliminated_at: Option<u32>,
    /// Final optimizer status.
    pub status: Status,
}

/// A history entry placed on the global time axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// Global time in time units.
    pub time: f64,
    /// The optimizer's record.
    #[serde(flatten)]
    pub entry: HistoryEntry,
}

/// What one thread did during one leg.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadLeg {
    /// Thread index.
    pub thread: usize,
    /// Configuration it ran.
    pub config_id: usize,
    /// `"start"` for a new configuration, `"resume"` for a survivor.
    pub action: String,
    /// Optimizer steps taken during the leg.
    pub steps: u64,
}

/// One leg between consecutive checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegRecord {
    /// Leg index `0..=R`.
    pub round: u32,
    /// Start time in units.
    pub start: f64,
    /// End time in units.
    pub end: f64,
    /// Per-thread activity.
    pub threads: Vec<ThreadLeg>,
}

/// One elimination at a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationRecord {
    /// Checkpoint index `1..=R`.
    pub round: u32,
    /// Checkpoint time in units.
    pub time: f64,
    /// Loss per thread at the checkpoint.
    pub losses: Vec<f64>,
    /// Threads whose configuration continues.
    pub survivors: Vec<usize>,
    /// Threads restarted with a fresh configuration.
    pub replaced: Vec<usize>,
}

/// Point of the best-validation-accuracy-over-time curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Time in units.
    pub time: f64,
    /// Best validation accuracy seen so far.
    pub best_val_accuracy: f64,
    /// Test accuracy of the configuration that achieved it.
    pub test_accuracy: f64,
}

/// Winner of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestConfig {
    /// Id of the winning configuration record.
    pub config_id: usize,
    /// The winning configuration and its search-time scores.
    #[serde(flatten)]
    pub evaluation: Evaluation,
}

/// Full record of a search run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// `"pg-learn"`, `"gradient"`, `"grid"` or `"random"`.
    pub method: String,
    /// Every examined configuration.
    pub configs: Vec<ConfigRecord>,
    /// Scheduler legs (empty for baselines).
    pub legs: Vec<LegRecord>,
    /// Eliminations (empty for baselines).
    pub eliminations: Vec<EliminationRecord>,
    /// Returned configuration.
    pub best: BestConfig,
    /// Best validation accuracy over time.
    pub curve: Vec<CurvePoint>,
    /// Optimizer steps or configuration evaluations consumed.
    pub work: u64,
    /// Wall-clock seconds, when measured.
    pub elapsed_seconds: Option<f64>,
    /// Free-form per-level notes (grid refinement levels).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Running maximum of validation accuracy over `(time, val, test)` samples.
pub fn best_accuracy_curve(mut samples: Vec<(f64, f64, f64)>) -> Vec<CurvePoint> {
    samples.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Vec<CurvePoint> = Vec::with_capacity(samples.len());
    let mut best: Option<(f64, f64)> = None;
    for (time, val, test) in samples {
        if best.is_none_or(|(b, _)| val > b) {
            best = Some((val, test));
        }
        let (b, t) = best.expect("set above");
        match out.last_mut() {
            Some(p) if p.time == time => {
                p.best_val_accuracy = b;
                p.test_accuracy = t;
            }
            _ => out.push(CurvePoint { time, best_val_accuracy: b, test_accuracy: t }),
        }
    }
    out
}
