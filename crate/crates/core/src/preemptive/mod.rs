//! Preemptive scheduling with commitment: an admission rule decides each job
//! on arrival, and accepted jobs are run by repeatedly generated plans.

mod admission;
mod plan;

pub use admission::{solve_dmin, AcceptAll, Admission, Greedy, LazyAcceptance};
pub use plan::{generate_plan, lrpt_assign, Allocation, PlanWindow, DONE_TOL};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{Decision, DecisionLog, Instance, Job, Schedule, Time, TOL};
use crate::online::OnlinePolicy;
use crate::vmin::{horn_feasible, v_min_curve, ActiveJob};
use admission::scaled_le;

const MAX_STEPS: usize = 2_000_000;

/// How much checking the simulator does after each event.
///
/// Level 1 checks feasibility of the accepted set and the admission rule's
/// own invariants; level 2 also checks that the minimum-volume curve decays
/// at least proportionally between consecutive events.
pub type AssertLevel = u8;

/// Final state of a preemptive run.
#[derive(Debug, Clone)]
pub struct PreemptiveRun {
    pub log: DecisionLog,
    pub schedule: Schedule,
    pub accepted: Vec<Job>,
    /// Time of every arrival and plan boundary, in order.
    pub events: Vec<Time>,
    pub trace: Vec<String>,
}

impl PreemptiveRun {
    pub fn accepted_volume(&self) -> f64 {
        self.accepted.iter().map(|j| j.processing).sum()
    }
}

/// Event-driven simulator for one admission rule.
#[derive(Debug)]
pub struct PreemptiveSimulator<A: Admission> {
    admission: A,
    machines: usize,
    assert_level: AssertLevel,
    clock: Time,
    accepted: BTreeMap<usize, Job>,
    executed: BTreeMap<usize, f64>,
    schedule: Schedule,
    log: DecisionLog,
    events: Vec<Time>,
    trace: Vec<String>,
}

impl<A: Admission> PreemptiveSimulator<A> {
    pub fn new(admission: A, machines: usize, assert_level: AssertLevel) -> Self {
        PreemptiveSimulator {
            admission,
            machines,
            assert_level,
            clock: 0.0,
            accepted: BTreeMap::new(),
            executed: BTreeMap::new(),
            schedule: Schedule::new(machines),
            log: DecisionLog::default(),
            events: Vec::new(),
            trace: Vec::new(),
        }
    }

    pub fn clock(&self) -> Time {
        self.clock
    }

    pub fn admission(&self) -> &A {
        &self.admission
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn log(&self) -> &DecisionLog {
        &self.log
    }

    /// Accepted jobs with work left, by id, remaining work derived from the
    /// committed segments.
    pub fn active(&self) -> Vec<ActiveJob> {
        self.accepted
            .values()
            .filter_map(|j| {
                let left = j.processing - self.executed.get(&j.id).copied().unwrap_or(0.0);
                (left > DONE_TOL).then(|| ActiveJob::new(j.id, left, j.deadline))
            })
            .collect()
    }

    fn accepted_volume(&self) -> f64 {
        self.accepted.values().map(|j| j.processing).sum()
    }

    fn note(&mut self, kind: &str) {
        let fmt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.9}"));
        let line = format!(
            "t={:.9} {kind} d_min={} v_delta={} accepted_volume={:.9}",
            self.clock,
            fmt(self.admission.threshold()),
            fmt(self.admission.compensation()),
            self.accepted_volume()
        );
        self.trace.push(line);
    }

    fn fail(&self, e: Error) -> Error {
        e.with_trace(self.trace.clone())
    }

    fn check_state(&self) -> Result<()> {
        if self.assert_level == 0 {
            return Ok(());
        }
        let active = self.active();
        if !horn_feasible(&active, self.clock, self.machines) {
            return Err(Error::invariant(self.clock, "accepted set is no longer feasible"));
        }
        self.admission.check(&active, self.clock, self.machines)
    }

    /// Runs plans until `target`, or until no work is left when `target` is `None`.
    fn run(&mut self, target: Option<Time>) -> Result<()> {
        let mut steps = 0;
        loop {
            if let Some(limit) = target {
                if self.clock >= limit {
                    break;
                }
            }
            let before = self.active();
            let t0 = self.clock;
            let plan = generate_plan(&before, t0, self.machines).map_err(|e| self.fail(e))?;
            let Some(plan) = plan else {
                if let Some(limit) = target {
                    self.clock = limit;
                }
                break;
            };
            let until = target.map_or(plan.end, |limit| plan.end.min(limit));
            for seg in plan.realize(until) {
                *self.executed.entry(seg.job).or_insert(0.0) += seg.len();
                self.schedule.push(seg);
            }
            self.clock = until;
            self.events.push(until);
            self.note("plan");
            if self.assert_level >= 2 {
                check_decay(&before, t0, &self.active(), until).map_err(|e| self.fail(e))?;
            }
            self.check_state().map_err(|e| self.fail(e))?;
            steps += 1;
            if steps > MAX_STEPS {
                return Err(self.fail(Error::invariant(self.clock, "plan loop did not terminate")));
            }
        }
        Ok(())
    }

    pub fn advance_to(&mut self, t: Time) -> Result<()> {
        self.run(Some(t))
    }

    /// Runs every accepted job to completion and returns the result.
    pub fn finish(mut self) -> Result<PreemptiveRun> {
        self.run(None)?;
        Ok(PreemptiveRun {
            log: self.log,
            schedule: self.schedule,
            accepted: self.accepted.into_values().collect(),
            events: self.events,
            trace: self.trace,
        })
    }
}

impl<A: Admission> OnlinePolicy for PreemptiveSimulator<A> {
    fn offer(&mut self, job: &Job) -> Result<Decision> {
        if job.release < self.clock - TOL {
            return Err(Error::ClockRegression {
                job: job.id,
                release: job.release,
                clock: self.clock,
            });
        }
        self.advance_to(job.release)?;
        let active = self.active();
        let (accepted, threshold) = self
            .admission
            .admit(&active, self.clock, self.machines, job)
            .map_err(|e| self.fail(e))?;
        let decision = if accepted {
            self.accepted.insert(job.id, *job);
            self.note(&format!("accept job={}", job.id));
            Decision::accept(job.id, self.clock, threshold)
        } else {
            self.note(&format!("reject job={}", job.id));
            Decision::reject(job.id, self.clock, threshold)
        };
        self.log.push(decision);
        self.events.push(self.clock);
        self.check_state().map_err(|e| self.fail(e))?;
        Ok(decision)
    }
}

/// Between events at `t < t2` with no acceptance, the minimum volume that
/// must still run before any `τ` shrinks at least in proportion to the time
/// that has passed: `V_min(τ)|_{t2} ≤ (τ−t2)/(τ−t)·V_min(τ)|_t`.
pub fn check_decay(before: &[ActiveJob], t: Time, after: &[ActiveJob], t2: Time) -> Result<()> {
    let old = v_min_curve(before, t);
    let new = v_min_curve(after, t2);
    for &tau in old.breakpoints().iter().chain(new.breakpoints()) {
        if tau <= t2 {
            continue;
        }
        let lhs = new.eval(tau);
        let rhs = (tau - t2) / (tau - t) * old.eval(tau);
        if !scaled_le(lhs, rhs) {
            return Err(Error::invariant(
                t2,
                format!("V_min({tau}) = {lhs} did not decay below {rhs} since t={t}"),
            ));
        }
    }
    Ok(())
}

fn simulate_with<A: Admission>(
    instance: &Instance,
    admission: A,
    assert_level: AssertLevel,
) -> Result<PreemptiveRun> {
    let mut sim = PreemptiveSimulator::new(admission, instance.machines, assert_level);
    for job in &instance.jobs {
        sim.offer(job)?;
    }
    sim.finish()
}

/// Lazy acceptance with plan-based scheduling.
pub fn simulate_preemptive(instance: &Instance, assert_level: AssertLevel) -> Result<PreemptiveRun> {
    simulate_with(
        instance,
        LazyAcceptance::new(instance.machines, instance.epsilon),
        assert_level,
    )
}

/// Accepts whenever the accepted set stays feasible; same scheduler.
pub fn simulate_greedy_preemptive(
    instance: &Instance,
    assert_level: AssertLevel,
) -> Result<PreemptiveRun> {
    simulate_with(instance, Greedy, assert_level)
}

/// Accepts every job; the instance must be feasible as a whole.
pub fn simulate_accept_all(instance: &Instance, assert_level: AssertLevel) -> Result<PreemptiveRun> {
    simulate_with(instance, AcceptAll, assert_level)
}
