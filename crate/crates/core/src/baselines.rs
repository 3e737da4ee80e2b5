//! Grid and random search over `(k, a)` under an evaluation budget.
//!
//! One evaluation builds the graph, solves the diffusion and scores the
//! validation points, so budgets are comparable with the scheduler's
//! step accounting (one optimizer step = one evaluation).

use alloc::format;
use alloc::vec::Vec;

use crate::graph::HyperConfig;
use crate::math::{exp, ln};
use crate::optimizer::{Evaluation, HistoryEntry, OptimizerSettings, Problem, SearchSpace, Status, StepBudget};
use crate::report::{best_accuracy_curve, BestConfig, ConfigRecord, RunReport, TracePoint};
use crate::{rng, Error, Result};

/// Incumbent rule: higher validation accuracy wins, then lower loss; earlier wins ties.
fn improves(candidate: &Evaluation, incumbent: Option<&Evaluation>) -> bool {
    match incumbent {
        None => true,
        Some(inc) => {
            candidate.val_accuracy > inc.val_accuracy
                || (candidate.val_accuracy == inc.val_accuracy && candidate.loss < inc.loss)
        }
    }
}

struct Recorder {
    configs: Vec<ConfigRecord>,
    best: Option<(usize, Evaluation)>,
}

impl Recorder {
    fn new() -> Self {
        Self { configs: Vec::new(), best: None }
    }

    fn push(&mut self, eval: Evaluation) {
        let id = self.configs.len();
        let entry = HistoryEntry {
            iteration: 0,
            loss: eval.loss,
            val_accuracy: eval.val_accuracy,
            test_accuracy: eval.test_accuracy,
        };
        self.configs.push(ConfigRecord {
            id,
            thread: 0,
            origin_round: 0,
            initial: eval.config.clone(),
            current: eval.config.clone(),
            trace: alloc::vec![TracePoint { time: (id + 1) as f64, entry }],
            eliminated_at: None,
            status: Status::Converged,
        });
        if improves(&eval, self.best.as_ref().map(|(_, e)| e)) {
            self.best = Some((id, eval));
        }
    }

    fn finish(self, method: &str, notes: Vec<alloc::string::String>) -> Result<RunReport> {
        let (config_id, evaluation) =
            self.best.ok_or_else(|| Error::InvalidParameter("budget allows no evaluation".into()))?;
        let samples = self
            .configs
            .iter()
            .flat_map(|c| c.trace.iter().map(|p| (p.time, p.entry.val_accuracy, p.entry.test_accuracy)))
            .collect();
        Ok(RunReport {
            method: method.into(),
            work: self.configs.len() as u64,
            curve: best_accuracy_curve(samples),
            configs: self.configs,
            legs: Vec::new(),
            eliminations: Vec::new(),
            best: BestConfig { config_id, evaluation },
            elapsed_seconds: None,
            notes,
        })
    }
}

/// One grid cell: integer `k` and log-bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    k: usize,
    log_sigma: f64,
}

/// Coarse-to-fine search over `(k, σ)` with a single bandwidth for every dimension.
///
/// Starts from a 4×4 grid spanning the search space; every refinement halves
/// both spacings and evaluates the unvisited cells of the 3×3 neighborhood
/// of the incumbent. Cells are visited row-major (`k` outer, `σ` inner).
pub fn grid_search<B: StepBudget + ?Sized>(
    problem: &Problem<'_>,
    space: &SearchSpace,
    settings: &OptimizerSettings,
    budget: &mut B,
) -> Result<RunReport> {
    let d = problem.dataset().d();
    let (lo, hi) = space.sigma_range();
    let (llo, lhi) = (ln(lo), ln(hi));
    let (k_lo, k_hi) = (space.k_min as f64, space.k_max as f64);
    let mut k_step = (k_hi - k_lo) / 3.0;
    let mut s_step = (lhi - llo) / 3.0;

    let mut rec = Recorder::new();
    let mut cells: Vec<Cell> = Vec::new();
    let mut notes = Vec::new();
    let mut done = 0u64;

    let same = |a: &Cell, b: &Cell| a.k == b.k && (a.log_sigma - b.log_sigma).abs() <= 1e-12 * (1.0 + b.log_sigma.abs());
    let round_k = |k: f64| (libm::round(k.clamp(k_lo, k_hi)) as usize).clamp(space.k_min, space.k_max);

    let mut level = 0u32;
    let mut incumbent_cell: Option<Cell> = None;
    loop {
        let candidates: Vec<Cell> = match incumbent_cell {
            None => (0..4)
                .flat_map(|i| (0..4).map(move |j| (i, j)))
                .map(|(i, j)| Cell { k: round_k(k_lo + k_step * i as f64), log_sigma: llo + s_step * j as f64 })
                .collect(),
            Some(c) => (-1i32..=1)
                .flat_map(|i| (-1i32..=1).map(move |j| (i, j)))
                .map(|(i, j)| Cell {
                    k: round_k(c.k as f64 + k_step * i as f64),
                    log_sigma: (c.log_sigma + s_step * j as f64).clamp(llo, lhi),
                })
                .collect(),
        };
        let mut evaluated_here = 0;
        for cell in candidates {
            if cells.iter().any(|c| same(c, &cell)) {
                continue;
            }
            if !budget.allows(done) {
                notes.push(format!("level {level}: k-step {k_step:.4}, log-sigma-step {s_step:.4}, {evaluated_here} cells (budget exhausted)"));
                return rec.finish("grid", notes);
            }
            let sigma = exp(cell.log_sigma);
            let eval = problem.evaluate(&HyperConfig::uniform(cell.k, sigma, d), &settings.solver)?;
            done += 1;
            evaluated_here += 1;
            cells.push(cell);
            let better = improves(&eval, rec.best.as_ref().map(|(_, e)| e));
            rec.push(eval);
            if better {
                incumbent_cell = Some(cell);
            }
        }
        notes.push(format!("level {level}: k-step {k_step:.4}, log-sigma-step {s_step:.4}, {evaluated_here} cells"));
        if s_step < 1e-9 && evaluated_here == 0 {
            return rec.finish("grid", notes);
        }
        k_step /= 2.0;
        s_step /= 2.0;
        level += 1;
    }
}

/// Independent random configurations drawn exactly like the optimizer's initializations.
pub fn random_search_d<B: StepBudget + ?Sized>(
    problem: &Problem<'_>,
    space: &SearchSpace,
    settings: &OptimizerSettings,
    budget: &mut B,
    seed: u64,
) -> Result<RunReport> {
    let d = problem.dataset().d();
    let mut rec = Recorder::new();
    let mut done = 0u64;
    while budget.allows(done) {
        let config = space.sample(d, rng::derive(seed, 0, done));
        rec.push(problem.evaluate(&config, &settings.solver)?);
        done += 1;
    }
    rec.finish("random", Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{sample_split, synthetic, Dataset, SplitSpec};
    use crate::optimizer::Iterations;

    fn setup() -> (Dataset, SplitSpec) {
        let spec = synthetic::BlobSpec { n: 80, classes: 3, dims: 4, center_scale: 3.0, spread: 1.0 };
        let ds = synthetic::gaussian_blobs(&spec, 8).unwrap();
        let split = sample_split(&ds, 0.2, 0.5, 8).unwrap();
        (ds, split)
    }

    #[test]
    fn sixteen_evaluations_is_the_initial_grid() {
        let (ds, split) = setup();
        let p = Problem::new(&ds, &split).unwrap();
        let space = SearchSpace::from_dataset(&ds, 0).unwrap();
        let r = grid_search(&p, &space, &OptimizerSettings::default(), &mut Iterations(16)).unwrap();
        assert_eq!(r.configs.len(), 16);
        let ks: Vec<usize> = r.configs.iter().map(|c| c.initial.k).collect();
        assert_eq!(&ks[..4], &[5, 5, 5, 5]);
        assert_eq!(ks[15], 20);
        let (lo, hi) = space.sigma_range();
        let a0 = r.configs[0].initial.a[0];
        assert!((a0 - 1.0 / (lo * lo)).abs() <= 1e-9 * a0);
        let a3 = r.configs[3].initial.a[0];
        assert!((a3 - 1.0 / (hi * hi)).abs() <= 1e-9 * a3);
        for c in &r.configs {
            assert!(c.initial.a.iter().all(|&a| a == c.initial.a[0]));
        }
    }

    #[test]
    fn incumbent_never_gets_worse_with_budget() {
        let (ds, split) = setup();
        let p = Problem::new(&ds, &split).unwrap();
        let space = SearchSpace::from_dataset(&ds, 0).unwrap();
        let s = OptimizerSettings::default();
        let mut prev = 0.0;
        for b in [1, 5, 16, 24, 40] {
            let g = grid_search(&p, &space, &s, &mut Iterations(b)).unwrap();
            assert!(g.best.evaluation.val_accuracy >= prev);
            prev = g.best.evaluation.val_accuracy;
        }
        let mut prev = 0.0;
        for b in [1, 4, 10, 30] {
            let r = random_search_d(&p, &space, &s, &mut Iterations(b), 3).unwrap();
            assert_eq!(r.configs.len() as u64, b);
            assert!(r.best.evaluation.val_accuracy >= prev);
            prev = r.best.evaluation.val_accuracy;
        }
    }

    #[test]
    fn random_search_single_and_reproducible() {
        let (ds, split) = setup();
        let p = Problem::new(&ds, &split).unwrap();
        let space = SearchSpace::from_dataset(&ds, 0).unwrap();
        let s = OptimizerSettings::default();
        let one = random_search_d(&p, &space, &s, &mut Iterations(1), 9).unwrap();
        assert_eq!(one.best.evaluation.config, one.configs[0].initial);
        let a = random_search_d(&p, &space, &s, &mut Iterations(12), 9).unwrap();
        let b = random_search_d(&p, &space, &s, &mut Iterations(12), 9).unwrap();
        assert_eq!(a, b);
        assert!(random_search_d(&p, &space, &s, &mut Iterations(0), 9).is_err());
    }
}
