//! Resumable gradient search over the RBF weights `a` at fixed `k`.
//!
//! Each step rebuilds the kNN graph for the current `a`, solves the diffusion
//! (warm-started), evaluates the rank loss and its gradient, and moves `a`
//! against the gradient with halving backtracking, projecting onto
//! `a_m ≥ a_floor`.

use alloc::format;
use alloc::vec::Vec;
use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{build_label_matrix, Dataset, SplitSpec};
use crate::graph::{build_knn_graph, reweight, HyperConfig, SparseGraph};
use crate::math::{exp, ln, sqrt};
use crate::objective::{loss_and_gradient, rank_loss, GradientStats};
use crate::propagation::{accuracy, lgc_power_solve, predict, SolutionMatrix, SolverSettings};
use crate::{rng, Error, Mat, Result};

/// Points used to estimate the mean pairwise distance.
pub const MEAN_DISTANCE_SAMPLE: usize = 1000;

/// Mean Euclidean distance over all pairs of `min(n, sample)` points drawn
/// without replacement (all points when `n ≤ sample`).
pub fn mean_pairwise_distance(features: &Mat, sample_size: usize, seed: u64) -> Result<f64> {
    let n = features.rows();
    let idx: Vec<usize> = if n <= sample_size {
        (0..n).collect()
    } else {
        let mut r = rng::from_seed(seed);
        let mut v = sample(&mut r, n, sample_size).into_vec();
        v.sort_unstable();
        v
    };
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (p, &i) in idx.iter().enumerate() {
        for &j in &idx[p + 1..] {
            let sq: f64 = features.row(i).iter().zip(features.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            total += sqrt(sq);
            pairs += 1;
        }
    }
    let mean = if pairs == 0 { 0.0 } else { total / pairs as f64 };
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(Error::InvalidData("all sampled points coincide; mean distance is zero".into()));
    }
    Ok(mean)
}

/// Sampling ranges for random configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    /// Smallest neighbor count.
    pub k_min: usize,
    /// Largest neighbor count (already clipped to `n - 1`).
    pub k_max: usize,
    /// Mean pairwise distance `d̄`.
    pub mean_distance: f64,
    /// Bandwidths are drawn log-uniformly from `[sigma_lo·d̄, sigma_hi·d̄]`.
    pub sigma_lo: f64,
    /// Upper bandwidth factor.
    pub sigma_hi: f64,
}

impl SearchSpace {
    /// Default ranges (`k ∈ [5, 20]`, `σ ∈ [0.1 d̄, 10 d̄]`) for a dataset.
    pub fn from_dataset(dataset: &Dataset, seed: u64) -> Result<Self> {
        Self::with_k_range(dataset, 5, 20, seed)
    }

    /// Ranges with a custom neighbor-count interval.
    pub fn with_k_range(dataset: &Dataset, k_min: usize, k_max: usize, seed: u64) -> Result<Self> {
        if k_min == 0 || k_min > k_max {
            return Err(Error::InvalidParameter(format!("bad k range [{k_min}, {k_max}]")));
        }
        let k_max = k_max.min(dataset.n() - 1);
        let k_min = k_min.min(k_max);
        let mean_distance = mean_pairwise_distance(dataset.features(), MEAN_DISTANCE_SAMPLE, seed)?;
        Ok(Self { k_min, k_max, mean_distance, sigma_lo: 0.1, sigma_hi: 10.0 })
    }

    /// `a_floor = 1e-12 / d̄²`.
    pub fn a_floor(&self) -> f64 {
        1e-12 / (self.mean_distance * self.mean_distance)
    }

    /// Smallest and largest bandwidth.
    pub fn sigma_range(&self) -> (f64, f64) {
        (self.sigma_lo * self.mean_distance, self.sigma_hi * self.mean_distance)
    }

    /// Draws `k` uniformly and every `σ_m` log-uniformly; `a_m = 1/σ_m²`.
    pub fn sample(&self, d: usize, seed: u64) -> HyperConfig {
        let mut r = rng::from_seed(seed);
        let k = r.random_range(self.k_min..=self.k_max);
        let (lo, hi) = self.sigma_range();
        let (llo, lhi) = (ln(lo), ln(hi));
        let a = (0..d)
            .map(|_| {
                let sigma = exp(r.random_range(llo..=lhi));
                1.0 / (sigma * sigma)
            })
            .collect();
        HyperConfig { k, a }
    }
}

/// Gradient search settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    /// Relative step size: a step moves `a` by `γ‖a‖_∞` in the direction of
    /// the ∞-normalized negative gradient, before backtracking.
    pub gamma: f64,
    /// Maximum number of step halvings when the loss increases.
    pub max_halvings: u32,
    /// Converged once `‖Δa‖_∞ ≤ eps_conv ‖a‖_∞`.
    pub eps_conv: f64,
    /// Diffusion solver settings (also used for the `dF/da_m` solves).
    pub solver: SolverSettings,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self { gamma: 0.05, max_halvings: 8, eps_conv: 1e-3, solver: SolverSettings::default() }
    }
}

/// Life-cycle of one optimizer run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Still improving.
    Running,
    /// Last accepted step was below the convergence threshold.
    Converged,
    /// A non-finite loss or gradient appeared.
    Diverged,
}

/// One recorded iteration: the loss and accuracies of the configuration in effect at that iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    /// Iteration index `t`.
    pub iteration: u64,
    /// Validation rank loss.
    pub loss: f64,
    /// Validation accuracy.
    pub val_accuracy: f64,
    /// Accuracy on the unlabeled (test) points.
    pub test_accuracy: f64,
}

/// A configuration together with its measured quality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// The evaluated configuration.
    pub config: HyperConfig,
    /// Validation rank loss.
    pub loss: f64,
    /// Validation accuracy.
    pub val_accuracy: f64,
    /// Test accuracy.
    pub test_accuracy: f64,
}

/// A labeled problem prepared for search: dataset, split and the search-time label matrix.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    dataset: &'a Dataset,
    split: &'a SplitSpec,
    y_search: Mat,
}

impl<'a> Problem<'a> {
    /// Validates the split; validation labels are excluded from `Y`.
    pub fn new(dataset: &'a Dataset, split: &'a SplitSpec) -> Result<Self> {
        split.validate(dataset)?;
        if split.validation.is_empty() {
            return Err(Error::InvalidData("validation set is empty".into()));
        }
        if split.unlabeled.is_empty() {
            return Err(Error::InvalidData("test set is empty".into()));
        }
        let y_search = build_label_matrix(dataset, split, false);
        Ok(Self { dataset, split, y_search })
    }

    /// The dataset.
    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    /// The split.
    pub fn split(&self) -> &'a SplitSpec {
        self.split
    }

    /// Label matrix used during search.
    pub fn y_search(&self) -> &Mat {
        &self.y_search
    }

    /// Builds the graph for `config` and solves the diffusion.
    pub fn solve(&self, config: &HyperConfig, solver: &SolverSettings, warm: Option<&Mat>) -> Result<(SparseGraph, SolutionMatrix)> {
        let graph = build_knn_graph(self.dataset, config)?;
        let sol = lgc_power_solve(&graph, &self.y_search, solver, warm)?;
        Ok((graph, sol))
    }

    /// Rank loss, validation accuracy and test accuracy of a solution.
    pub fn score(&self, f: &Mat) -> Result<(f64, f64, f64)> {
        let truth = self.dataset.labels();
        let loss = rank_loss(f, &self.split.validation, truth)?.value;
        let pred = predict(f);
        let val = accuracy(&pred.labels, truth, &self.split.validation)?;
        let test = accuracy(&pred.labels, truth, &self.split.unlabeled)?;
        Ok((loss, val, test))
    }

    /// Solves and scores one configuration.
    pub fn evaluate(&self, config: &HyperConfig, solver: &SolverSettings) -> Result<Evaluation> {
        let (_, sol) = self.solve(config, solver, None)?;
        let (loss, val_accuracy, test_accuracy) = self.score(&sol.f)?;
        Ok(Evaluation { config: config.clone(), loss, val_accuracy, test_accuracy })
    }

    /// Re-solves `config` with validation labels added to `Y` and scores the test set.
    pub fn refit(&self, config: &HyperConfig, solver: &SolverSettings) -> Result<Refit> {
        let graph = build_knn_graph(self.dataset, config)?;
        let y = build_label_matrix(self.dataset, self.split, true);
        let sol = lgc_power_solve(&graph, &y, solver, None)?;
        let pred = predict(&sol.f);
        let test = &self.split.unlabeled;
        let test_accuracy = accuracy(&pred.labels, self.dataset.labels(), test)?;
        Ok(Refit {
            config: config.clone(),
            test_accuracy,
            test_points: test.len(),
            unreached: test.iter().filter(|&&i| pred.unreached[i]).count(),
            edges: graph.edge_count(),
            iterations: sol.iterations,
            converged: sol.converged,
        })
    }
}

/// Result of [`Problem::refit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refit {
    /// Configuration that was refitted.
    pub config: HyperConfig,
    /// Accuracy on the test points.
    pub test_accuracy: f64,
    /// Number of test points.
    pub test_points: usize,
    /// Test points that received no label mass.
    pub unreached: usize,
    /// Stored graph entries.
    pub edges: usize,
    /// Solver iterations.
    pub iterations: usize,
    /// Whether the solver met its tolerance.
    pub converged: bool,
}

/// State of one gradient search; fully serializable for suspend/resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    /// Configuration in effect for the next step.
    pub config: HyperConfig,
    /// Solution used to warm-start the next diffusion solve.
    pub f_warm: Option<Mat>,
    /// Step size `γ`.
    pub gamma: f64,
    /// Projection floor for every `a_m`.
    pub a_floor: f64,
    /// Number of completed steps.
    pub iteration: u64,
    /// Append-only per-iteration record.
    pub loss_history: Vec<HistoryEntry>,
    /// Current status.
    pub status: Status,
    /// `‖Δa‖_∞` of the last step.
    pub last_step: f64,
    /// Most recently evaluated configuration and its scores.
    pub last_eval: Option<Evaluation>,
}

impl OptimizerState {
    /// Fresh state from a random configuration drawn from `space`.
    pub fn init(space: &SearchSpace, d: usize, settings: &OptimizerSettings, seed: u64) -> Self {
        Self::from_config(space.sample(d, seed), space.a_floor(), settings)
    }

    /// Fresh state from an explicit configuration.
    pub fn from_config(mut config: HyperConfig, a_floor: f64, settings: &OptimizerSettings) -> Self {
        for a in &mut config.a {
            *a = a.max(a_floor);
        }
        Self {
            config,
            f_warm: None,
            gamma: settings.gamma,
            a_floor,
            iteration: 0,
            loss_history: Vec::new(),
            status: Status::Running,
            last_step: f64::INFINITY,
            last_eval: None,
        }
    }

    /// True once the state will not take further steps.
    pub fn is_finished(&self) -> bool {
        self.status != Status::Running
    }

    /// Validation loss used to rank this state (`+∞` before any evaluation or after divergence).
    pub fn ranking_loss(&self) -> f64 {
        match (&self.last_eval, self.status) {
            (_, Status::Diverged) => f64::INFINITY,
            (Some(e), _) if e.loss.is_finite() => e.loss,
            _ => f64::INFINITY,
        }
    }
}

/// What a single call to [`gradient_step`] did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Loss at the configuration in effect before the step.
    pub loss: f64,
    /// Gradient at that configuration.
    pub gradient: Vec<f64>,
    /// Halvings used before a decrease was found.
    pub halvings: u32,
    /// Whether `a` changed.
    pub moved: bool,
    /// Storage accounting of the gradient evaluation.
    pub stats: GradientStats,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

/// One iteration: rebuild graph, solve, gradient, projected backtracking step.
pub fn gradient_step(state: &mut OptimizerState, problem: &Problem<'_>, settings: &OptimizerSettings) -> Result<StepReport> {
    if state.status == Status::Diverged {
        return Err(Error::NonFinite("state already diverged"));
    }
    let dataset = problem.dataset();
    let split = problem.split();
    let (graph, sol) = problem.solve(&state.config, &settings.solver, state.f_warm.as_ref())?;
    let (loss_value, val_accuracy, test_accuracy) = problem.score(&sol.f)?;
    state.loss_history.push(HistoryEntry { iteration: state.iteration, loss: loss_value, val_accuracy, test_accuracy });
    state.last_eval = Some(Evaluation { config: state.config.clone(), loss: loss_value, val_accuracy, test_accuracy });
    state.iteration += 1;

    if !loss_value.is_finite() {
        state.status = Status::Diverged;
        return Err(Error::NonFinite("rank loss"));
    }
    let lg = loss_and_gradient(dataset.features(), &graph, &sol.f, &split.validation, dataset.labels(), &settings.solver);
    let lg = match lg {
        Ok(lg) if lg.gradient.iter().all(|g| g.is_finite()) => lg,
        Ok(_) | Err(Error::NonFinite(_)) => {
            state.status = Status::Diverged;
            return Err(Error::NonFinite("gradient"));
        }
        Err(e) => return Err(e),
    };

    let gnorm = inf_norm(&lg.gradient);
    let a_norm = inf_norm(&state.config.a);
    let mut report = StepReport { loss: loss_value, gradient: lg.gradient.clone(), halvings: 0, moved: false, stats: lg.stats };
    state.f_warm = Some(sol.f);
    if gnorm == 0.0 {
        state.last_step = 0.0;
        state.status = Status::Converged;
        return Ok(report);
    }

    let mut step = state.gamma * a_norm / gnorm;
    let mut accepted = None;
    for h in 0..=settings.max_halvings {
        let trial: Vec<f64> = state
            .config
            .a
            .iter()
            .zip(&lg.gradient)
            .map(|(a, g)| (a - step * g).max(state.a_floor))
            .collect();
        // trials keep the current topology; the graph is rebuilt at the next step
        let trial_graph = reweight(dataset.features(), graph.pattern(), &trial);
        let trial_config = HyperConfig { k: state.config.k, a: trial };
        let outcome = lgc_power_solve(&trial_graph, problem.y_search(), &settings.solver, state.f_warm.as_ref())
            .and_then(|s| rank_loss(&s.f, &split.validation, dataset.labels()).map(|l| (l.value, s)));
        if let Ok((trial_loss, trial_sol)) = outcome {
            if trial_loss.is_finite() && trial_loss <= loss_value {
                report.halvings = h;
                accepted = Some((trial_config, trial_sol));
                break;
            }
        }
        step *= 0.5;
    }

    match accepted {
        Some((config, trial_sol)) => {
            let delta = config.a.iter().zip(&state.config.a).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
            state.config = config;
            state.f_warm = Some(trial_sol.f);
            state.last_step = delta;
            report.moved = delta > 0.0;
            if delta <= settings.eps_conv * inf_norm(&state.config.a) {
                state.status = Status::Converged;
            }
        }
        None => {
            report.halvings = settings.max_halvings;
            state.last_step = 0.0;
            state.status = Status::Converged;
        }
    }
    Ok(report)
}

/// Decides whether a run may take another step.
pub trait StepBudget {
    /// Called before each step with the number of steps already taken in this call.
    fn allows(&mut self, steps_done: u64) -> bool;
}

/// Budget of a fixed number of steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Iterations(pub u64);

impl StepBudget for Iterations {
    fn allows(&mut self, steps_done: u64) -> bool {
        steps_done < self.0
    }
}

/// Repeats [`gradient_step`] until convergence, divergence or the budget is spent.
///
/// Returns the number of steps taken. Divergence ends the run and is reported
/// through the state's status rather than as an error.
pub fn run_until<B: StepBudget + ?Sized>(
    state: &mut OptimizerState,
    problem: &Problem<'_>,
    settings: &OptimizerSettings,
    budget: &mut B,
) -> Result<u64> {
    let mut steps = 0;
    while !state.is_finished() && budget.allows(steps) {
        match gradient_step(state, problem, settings) {
            Ok(_) => {}
            Err(_) if state.status == Status::Diverged => break,
            Err(e) => return Err(e),
        }
        steps += 1;
    }
    Ok(steps)
}
