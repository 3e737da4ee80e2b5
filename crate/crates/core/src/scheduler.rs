//! Parallel successive halving over gradient-search runs.
//!
//! `T` threads each start a random configuration and run it for the first
//! leg. At each of `R = ⌊log_r B⌋` checkpoints the `⌊T/r⌋` runs with the
//! lowest validation loss resume, and the remaining threads restart from
//! fresh random configurations. Checkpoints fall at cumulative times
//! `B r^{-R}, B r^{-(R-1)}, …, B/r`, and the last leg ends at `B`.
//!
//! Execution is pluggable through [`Workers`]: [`SequentialWorkers`] runs
//! every leg on the calling thread; thread-pool executors live outside this
//! crate. Legs are barrier-synchronized, so in iteration-count mode the result
//! does not depend on the executor.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::optimizer::{
    run_until, Evaluation, HistoryEntry, Iterations, OptimizerSettings, OptimizerState, Problem, SearchSpace, Status,
    StepBudget,
};
use crate::report::{
    best_accuracy_curve, BestConfig, ConfigRecord, EliminationRecord, LegRecord, RunReport, ThreadLeg, TracePoint,
};
use crate::{rng, Error, Result};

/// Definition of one time unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    /// One unit is this many optimizer steps (deterministic).
    Iterations(u64),
    /// One unit is this many wall-clock seconds.
    Seconds(f64),
}

impl Default for TimeUnit {
    fn default() -> Self {
        TimeUnit::Iterations(4)
    }
}

/// Scheduler inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    /// Budget `B` in time units per thread.
    pub budget: u64,
    /// Downsampling rate `r`.
    pub rate: u64,
    /// Thread count `T`.
    pub threads: usize,
    /// Time unit.
    pub unit: TimeUnit,
    /// Master seed.
    pub seed: u64,
}

impl SchedulerConfig {
    /// Checks `B ≥ 1`, `r ≥ 2`, `T ≥ 1` and a positive unit.
    pub fn check(&self) -> Result<()> {
        if self.budget < 1 {
            return Err(Error::InvalidParameter("budget must be >= 1".into()));
        }
        if self.rate < 2 {
            return Err(Error::InvalidParameter("rate must be >= 2".into()));
        }
        if self.threads < 1 {
            return Err(Error::InvalidParameter("threads must be >= 1".into()));
        }
        match self.unit {
            TimeUnit::Iterations(0) => Err(Error::InvalidParameter("unit must be >= 1 iteration".into())),
            TimeUnit::Seconds(s) if !(s > 0.0) => Err(Error::InvalidParameter("unit must be > 0 seconds".into())),
            _ => Ok(()),
        }
    }

    /// `R = ⌊log_r B⌋`.
    pub fn rounds(&self) -> u32 {
        elimination_rounds(self.budget, self.rate)
    }

    /// Optimizer steps the whole run may consume in iteration mode (`T·B·U`);
    /// the baselines receive the same number of evaluations.
    pub fn total_steps(&self) -> Option<u64> {
        match self.unit {
            TimeUnit::Iterations(u) => Some(self.threads as u64 * self.budget * u),
            TimeUnit::Seconds(_) => None,
        }
    }
}

/// `⌊log_r B⌋`, computed in integers.
pub fn elimination_rounds(budget: u64, rate: u64) -> u32 {
    assert!(budget >= 1 && rate >= 2);
    let mut rounds = 0;
    let mut p = rate;
    while p <= budget {
        rounds += 1;
        match p.checked_mul(rate) {
            Some(q) => p = q,
            None => break,
        }
    }
    rounds
}

fn pow(base: u64, exp: u32) -> f64 {
    (0..exp).fold(1.0, |acc, _| acc * base as f64)
}

/// Duration of leg `i`: `B r^{-R}` for `i = 0`, `B (r^{-(R-i)} - r^{-(R-i+1)})` otherwise.
pub fn round_duration(i: u32, budget: u64, rate: u64, rounds: u32) -> f64 {
    assert!(i <= rounds);
    let b = budget as f64;
    if i == 0 {
        b / pow(rate, rounds)
    } else {
        b / pow(rate, rounds - i) - b / pow(rate, rounds - i + 1)
    }
}

/// Cumulative time at the end of leg `i`: `B r^{-(R-i)}`.
pub fn checkpoint_time(i: u32, budget: u64, rate: u64, rounds: u32) -> f64 {
    assert!(i <= rounds);
    budget as f64 / pow(rate, rounds - i)
}

/// Cumulative optimizer steps at the end of leg `i` with `U` steps per unit:
/// `⌊B U / r^{R-i}⌋`, so the legs sum to exactly `B U`.
pub fn checkpoint_steps(i: u32, budget: u64, rate: u64, rounds: u32, steps_per_unit: u64) -> u64 {
    assert!(i <= rounds);
    let denom = rate.pow(rounds - i);
    budget * steps_per_unit / denom
}

/// Threads kept at each checkpoint: `max(1, ⌊T/r⌋)`.
pub fn survivors(threads: usize, rate: u64) -> usize {
    (threads / rate as usize).max(1)
}

/// Total configurations examined: `T + (T - survivors)·R`.
pub fn configurations_examined(threads: usize, rate: u64, budget: u64) -> usize {
    threads + (threads - survivors(threads, rate)) * elimination_rounds(budget, rate) as usize
}

/// Indices of the `m` lowest losses; NaN ranks with `+∞` at the end, ties go to the lower index.
pub fn get_top(losses: &[f64], m: usize) -> Vec<usize> {
    let key = |l: f64| if l.is_nan() { f64::INFINITY } else { l };
    let mut idx: Vec<usize> = (0..losses.len()).collect();
    idx.sort_by(|&a, &b| key(losses[a]).total_cmp(&key(losses[b])).then(a.cmp(&b)));
    idx.truncate(m);
    idx
}

/// Instruction for one thread at the start of a leg.
#[derive(Debug, Clone, PartialEq)]
pub enum Assignment {
    /// Continue the current run.
    Resume,
    /// Discard the current run and start this one.
    Start(OptimizerState),
}

/// How long a leg lasts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LegLimit {
    /// Exactly this many optimizer steps (fewer if the run finishes).
    Steps(u64),
    /// Keep stepping until this many wall-clock seconds have elapsed.
    Seconds(f64),
}

/// One leg between checkpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leg {
    /// Leg index.
    pub round: u32,
    /// Length of the leg.
    pub limit: LegLimit,
}

/// What a thread reports back at a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct LegOutcome {
    /// Loss used for ranking (`+∞` when diverged or never evaluated).
    pub loss: f64,
    /// Latest evaluated configuration and scores.
    pub last_eval: Option<Evaluation>,
    /// History entries appended during the leg.
    pub new_history: Vec<HistoryEntry>,
    /// Configuration after the leg.
    pub current: crate::graph::HyperConfig,
    /// Status after the leg.
    pub status: Status,
    /// Steps taken during the leg.
    pub steps: u64,
}

/// Applies an assignment and runs one leg on a single state.
pub fn run_thread_leg<B: StepBudget + ?Sized>(
    slot: &mut Option<OptimizerState>,
    assignment: Assignment,
    problem: &Problem<'_>,
    settings: &OptimizerSettings,
    budget: &mut B,
) -> Result<LegOutcome> {
    if let Assignment::Start(s) = assignment {
        *slot = Some(s);
    }
    let state = slot.as_mut().ok_or_else(|| Error::Internal("resume on an empty thread".into()))?;
    let before = state.loss_history.len();
    let steps = run_until(state, problem, settings, budget)?;
    Ok(LegOutcome {
        loss: state.ranking_loss(),
        last_eval: state.last_eval.clone(),
        new_history: state.loss_history[before..].to_vec(),
        current: state.config.clone(),
        status: state.status,
        steps,
    })
}

/// Executes legs on behalf of the scheduler's master.
pub trait Workers {
    /// Number of threads `T`.
    fn threads(&self) -> usize;
    /// Runs one leg on every thread after applying `assignments[t]` to thread `t`.
    fn run_leg(&mut self, assignments: Vec<Assignment>, leg: Leg) -> Result<Vec<LegOutcome>>;
}

/// Runs every thread's leg in turn on the calling thread (iteration units only).
pub struct SequentialWorkers<'p, 'd> {
    problem: &'p Problem<'d>,
    settings: OptimizerSettings,
    slots: Vec<Option<OptimizerState>>,
}

impl<'p, 'd> SequentialWorkers<'p, 'd> {
    /// `threads` empty slots.
    pub fn new(problem: &'p Problem<'d>, settings: OptimizerSettings, threads: usize) -> Self {
        Self { problem, settings, slots: (0..threads).map(|_| None).collect() }
    }

    /// Current optimizer states.
    pub fn states(&self) -> &[Option<OptimizerState>] {
        &self.slots
    }
}

impl Workers for SequentialWorkers<'_, '_> {
    fn threads(&self) -> usize {
        self.slots.len()
    }

    fn run_leg(&mut self, assignments: Vec<Assignment>, leg: Leg) -> Result<Vec<LegOutcome>> {
        let LegLimit::Steps(steps) = leg.limit else {
            return Err(Error::InvalidParameter("sequential workers only support iteration units".into()));
        };
        self.slots
            .iter_mut()
            .zip(assignments)
            .map(|(slot, a)| run_thread_leg(slot, a, self.problem, &self.settings, &mut Iterations(steps)))
            .collect()
    }
}

/// Runs the full successive-halving protocol and returns its report.
pub fn pg_learn<W: Workers + ?Sized>(
    problem: &Problem<'_>,
    space: &SearchSpace,
    settings: &OptimizerSettings,
    config: &SchedulerConfig,
    workers: &mut W,
) -> Result<RunReport> {
    config.check()?;
    if workers.threads() != config.threads {
        return Err(Error::InvalidParameter(format!(
            "{} workers for {} threads",
            workers.threads(),
            config.threads
        )));
    }
    let t_count = config.threads;
    let rounds = config.rounds();
    let keep = survivors(t_count, config.rate);
    let d = problem.dataset().d();
    let fresh = |thread: usize, round: u32| {
        OptimizerState::init(space, d, settings, rng::derive(config.seed, thread as u64, round as u64))
    };

    let mut configs: Vec<ConfigRecord> = Vec::new();
    let mut current: Vec<usize> = Vec::with_capacity(t_count);
    let mut assignments = Vec::with_capacity(t_count);
    for t in 0..t_count {
        let s = fresh(t, 0);
        current.push(configs.len());
        configs.push(new_record(configs.len(), t, 0, &s));
        assignments.push(Assignment::Start(s));
    }
    let mut actions: Vec<&'static str> = alloc::vec!["start"; t_count];

    let mut legs = Vec::new();
    let mut eliminations = Vec::new();
    let mut losses = alloc::vec![f64::INFINITY; t_count];
    let mut last_evals: Vec<Option<Evaluation>> = alloc::vec![None; t_count];
    let mut work = 0u64;

    for round in 0..=rounds {
        let start = if round == 0 { 0.0 } else { checkpoint_time(round - 1, config.budget, config.rate, rounds) };
        let end = checkpoint_time(round, config.budget, config.rate, rounds);
        let limit = match config.unit {
            TimeUnit::Iterations(u) => {
                let before = if round == 0 { 0 } else { checkpoint_steps(round - 1, config.budget, config.rate, rounds, u) };
                LegLimit::Steps(checkpoint_steps(round, config.budget, config.rate, rounds, u) - before)
            }
            TimeUnit::Seconds(s) => LegLimit::Seconds((end - start) * s),
        };
        let outcomes = workers.run_leg(core::mem::take(&mut assignments), Leg { round, limit })?;
        if outcomes.len() != t_count {
            return Err(Error::Internal(format!("{} outcomes for {t_count} threads", outcomes.len())));
        }

        let mut thread_legs = Vec::with_capacity(t_count);
        for (t, out) in outcomes.into_iter().enumerate() {
            let rec = &mut configs[current[t]];
            let n_new = out.new_history.len();
            for (j, entry) in out.new_history.into_iter().enumerate() {
                let time = start + (end - start) * leg_fraction(limit, j, n_new);
                rec.trace.push(TracePoint { time, entry });
            }
            rec.current = out.current;
            rec.status = out.status;
            losses[t] = out.loss;
            last_evals[t] = out.last_eval;
            work += out.steps;
            thread_legs.push(ThreadLeg { thread: t, config_id: current[t], action: actions[t].into(), steps: out.steps });
        }
        legs.push(LegRecord { round, start, end, threads: thread_legs });

        if round < rounds {
            let checkpoint = round + 1;
            let top = get_top(&losses, keep);
            let mut replaced = Vec::new();
            for t in 0..t_count {
                if top.contains(&t) {
                    assignments.push(Assignment::Resume);
                    actions[t] = "resume";
                } else {
                    configs[current[t]].eliminated_at = Some(checkpoint);
                    let s = fresh(t, checkpoint);
                    current[t] = configs.len();
                    configs.push(new_record(configs.len(), t, checkpoint, &s));
                    assignments.push(Assignment::Start(s));
                    actions[t] = "start";
                    replaced.push(t);
                }
            }
            let mut survivors_sorted = top.clone();
            survivors_sorted.sort_unstable();
            eliminations.push(EliminationRecord {
                round: checkpoint,
                time: end,
                losses: losses.clone(),
                survivors: survivors_sorted,
                replaced,
            });
        }
    }

    let winner = get_top(&losses, 1)[0];
    let evaluation = match (&last_evals[winner], losses[winner].is_finite()) {
        (Some(e), true) => e.clone(),
        _ => {
            let diverged = configs.iter().filter(|c| c.status == Status::Diverged).count();
            return Err(Error::AllDiverged(format!(
                "{diverged} of {} configurations diverged, none finished with a finite loss",
                configs.len()
            )));
        }
    };
    let samples = configs
        .iter()
        .flat_map(|c| c.trace.iter().map(|p| (p.time, p.entry.val_accuracy, p.entry.test_accuracy)))
        .collect();
    let method: String = if t_count == 1 { "gradient".into() } else { "pg-learn".into() };
    Ok(RunReport {
        method,
        best: BestConfig { config_id: current[winner], evaluation },
        curve: best_accuracy_curve(samples),
        configs,
        legs,
        eliminations,
        work,
        elapsed_seconds: None,
        notes: Vec::new(),
    })
}

/// Position of the `j`-th of `n` entries within a leg, as a fraction of the leg.
fn leg_fraction(limit: LegLimit, j: usize, n: usize) -> f64 {
    match limit {
        LegLimit::Steps(steps) if steps > 0 => (j + 1) as f64 / steps as f64,
        _ => (j + 1) as f64 / n.max(1) as f64,
    }
}

fn new_record(id: usize, thread: usize, round: u32, s: &OptimizerState) -> ConfigRecord {
    ConfigRecord {
        id,
        thread,
        origin_round: round,
        initial: s.config.clone(),
        current: s.config.clone(),
        trace: Vec::new(),
        eliminated_at: None,
        status: s.status,
    }
}
