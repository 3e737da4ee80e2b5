//! Persistent worker threads for the scheduler.
//!
//! Each worker owns one optimizer state. The master sends one assignment per
//! leg and waits for every worker's outcome before eliminating, so legs are
//! barrier-synchronized and iteration-count runs match the sequential executor.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::time::{Duration, Instant};

use pglearn_core::optimizer::{Iterations, OptimizerSettings, OptimizerState, Problem, StepBudget};
use pglearn_core::scheduler::{run_thread_leg, Assignment, Leg, LegLimit, LegOutcome, Workers};
use pglearn_core::{Error, Result};

/// Wall-clock budget: steps are allowed until the deadline passes.
///
/// The first step of a call is always allowed so that every leg evaluates
/// its configuration at least once.
#[derive(Debug, Clone, Copy)]
pub struct Deadline {
    end: Instant,
}

impl Deadline {
    /// Deadline `duration` from now.
    pub fn after(duration: Duration) -> Self {
        Self { end: Instant::now() + duration }
    }
}

impl StepBudget for Deadline {
    fn allows(&mut self, steps_done: u64) -> bool {
        steps_done == 0 || Instant::now() < self.end
    }
}

enum Job {
    Leg(Box<Assignment>, Leg),
    Snapshot,
}

enum Reply {
    Leg(usize, Result<LegOutcome>),
    Snapshot(usize, Option<OptimizerState>),
}

/// Handle to `T` worker threads; see [`with_thread_pool`].
pub struct ThreadedWorkers {
    jobs: Vec<Sender<Job>>,
    replies: Receiver<Reply>,
}

impl ThreadedWorkers {
    /// Current optimizer state of every worker.
    pub fn states(&mut self) -> Result<Vec<Option<OptimizerState>>> {
        for tx in &self.jobs {
            tx.send(Job::Snapshot).map_err(|_| Error::Internal("worker exited".into()))?;
        }
        let mut out: Vec<Option<OptimizerState>> = vec![None; self.jobs.len()];
        for _ in 0..self.jobs.len() {
            match self.replies.recv() {
                Ok(Reply::Snapshot(t, s)) => out[t] = s,
                Ok(Reply::Leg(..)) => return Err(Error::Internal("unexpected leg reply".into())),
                Err(_) => return Err(Error::Internal("worker exited".into())),
            }
        }
        Ok(out)
    }
}

impl Workers for ThreadedWorkers {
    fn threads(&self) -> usize {
        self.jobs.len()
    }

    fn run_leg(&mut self, assignments: Vec<Assignment>, leg: Leg) -> Result<Vec<LegOutcome>> {
        if assignments.len() != self.jobs.len() {
            return Err(Error::Internal(format!("{} assignments for {} workers", assignments.len(), self.jobs.len())));
        }
        for (tx, a) in self.jobs.iter().zip(assignments) {
            tx.send(Job::Leg(Box::new(a), leg)).map_err(|_| Error::Internal("worker exited".into()))?;
        }
        let mut outcomes: Vec<Option<Result<LegOutcome>>> = (0..self.jobs.len()).map(|_| None).collect();
        for _ in 0..self.jobs.len() {
            match self.replies.recv() {
                Ok(Reply::Leg(t, r)) => outcomes[t] = Some(r),
                Ok(Reply::Snapshot(..)) => return Err(Error::Internal("unexpected snapshot reply".into())),
                Err(_) => return Err(Error::Internal("worker exited".into())),
            }
        }
        outcomes.into_iter().map(|o| o.expect("one reply per worker")).collect()
    }
}

fn worker_loop(
    thread: usize,
    problem: &Problem<'_>,
    settings: &OptimizerSettings,
    jobs: Receiver<Job>,
    replies: Sender<Reply>,
) {
    let mut slot: Option<OptimizerState> = None;
    for job in jobs {
        let reply = match job {
            Job::Snapshot => Reply::Snapshot(thread, slot.clone()),
            Job::Leg(assignment, leg) => {
                let result = catch_unwind(AssertUnwindSafe(|| match leg.limit {
                    LegLimit::Steps(n) => run_thread_leg(&mut slot, *assignment, problem, settings, &mut Iterations(n)),
                    LegLimit::Seconds(s) => {
                        let mut budget = Deadline::after(Duration::from_secs_f64(s.max(0.0)));
                        run_thread_leg(&mut slot, *assignment, problem, settings, &mut budget)
                    }
                }));
                let result = result.unwrap_or_else(|_| Err(Error::Internal(format!("worker {thread} panicked"))));
                Reply::Leg(thread, result)
            }
        };
        if replies.send(reply).is_err() {
            break;
        }
    }
}

/// Spawns `threads` workers for the duration of `body`; they exit when it returns.
pub fn with_thread_pool<R>(
    problem: &Problem<'_>,
    settings: OptimizerSettings,
    threads: usize,
    body: impl FnOnce(&mut ThreadedWorkers) -> R,
) -> R {
    std::thread::scope(|scope| {
        let (reply_tx, replies) = channel();
        let mut jobs = Vec::with_capacity(threads);
        for t in 0..threads {
            let (tx, rx) = channel();
            jobs.push(tx);
            let reply_tx = reply_tx.clone();
            let settings = &settings;
            scope.spawn(move || worker_loop(t, problem, settings, rx, reply_tx));
        }
        drop(reply_tx);
        let mut workers = ThreadedWorkers { jobs, replies };
        let out = body(&mut workers);
        // closing the job channels lets the threads finish
        drop(workers);
        out
    })
}
