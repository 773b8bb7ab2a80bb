//! Adaptive lower-bound adversaries and the constants of their bounds.
//!
//! Both adversaries submit jobs one at a time and pick the next job from the
//! decisions seen so far. After a run they can build an explicit offline
//! schedule for the submitted jobs, which serves as the optimum side of the
//! measured ratio when the instance is too large for the exact oracles.

use crate::error::{Error, Result};
use crate::model::{verify_schedule, Decision, Job, Schedule, ScheduleViolation, Segment, Time, TOL};
use crate::online::AdaptiveAdversary;
use crate::vmin::growth;

/// Default job granularity for the preemptive adversary.
pub const DEFAULT_DELTA: f64 = 1.0 / 64.0;

/// `⌊x⌋`, robust against `x` landing a hair below an integer.
fn floor_tol(x: f64) -> f64 {
    (x + 1e-9).floor()
}

/// An offline schedule built for an adversary's job sequence.
#[derive(Debug, Clone)]
pub struct ConstructiveOpt {
    pub volume: f64,
    /// Jobs the schedule completes.
    pub jobs: Vec<Job>,
    pub schedule: Schedule,
}

impl ConstructiveOpt {
    pub fn verify(&self) -> Vec<ScheduleViolation> {
        verify_schedule(&self.schedule, &self.jobs)
    }
}

/// McNaughton's wrap-around schedule of `jobs` over `[start, ...)` on
/// `machines` machines with a common horizon `end`. Callers make sure every
/// job fits: `p ≤ end − start` and total work ≤ `machines·(end − start)`.
fn wrap_schedule(jobs: &[Job], machines: usize, start: Time, end: Time) -> Schedule {
    let mut s = Schedule::new(machines);
    let mut machine = 0;
    let mut cursor = start;
    for job in jobs {
        let mut left = job.processing;
        while left > TOL {
            let room = end - cursor;
            if room <= TOL {
                machine += 1;
                cursor = start;
                continue;
            }
            let piece = left.min(room);
            s.push(Segment {
                machine,
                job: job.id,
                start: cursor,
                end: cursor + piece,
            });
            left -= piece;
            cursor += piece;
        }
    }
    s
}

#[derive(Debug, Clone, Copy)]
struct Block {
    processing: f64,
    deadline: Time,
    max_jobs: usize,
    /// Accepted volume that moves the adversary on; `None` for the last block.
    target: Option<f64>,
}

/// Blocks of identical jobs, all released at 0. Block 1 holds tiny jobs
/// with deadline `1+ε`; blocks `2..=m+1` hold tight jobs of length
/// `((1+ε)/ε)^{(k−2)/m}`; the last block holds `⌊m(1+ε)⌋` tight jobs of
/// length `(1+ε)/ε·(1−δ)`. The adversary moves to the next block once the
/// algorithm has accepted the block's target and stops if the block's
/// maximum is reached first.
#[derive(Debug, Clone)]
pub struct PreemptiveAdversary {
    machines: usize,
    epsilon: f64,
    delta: f64,
    block: usize,
    emitted_in_block: usize,
    accepted_in_block: f64,
    done: bool,
    emitted: Vec<Job>,
    block_of: Vec<usize>,
}

impl PreemptiveAdversary {
    /// `delta` is lowered as needed so that the first block's target volume
    /// is a whole number of jobs.
    pub fn new(machines: usize, epsilon: f64, delta: f64) -> Result<Self> {
        if machines == 0 || epsilon <= 0.0 || !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "adversary needs m >= 1, epsilon > 0 and 0 < delta < 1 (got {machines}, {epsilon}, {delta})"
            )));
        }
        let target = Self::first_target(machines, epsilon);
        let count = (target / delta - 1e-9).ceil().max(1.0);
        Ok(PreemptiveAdversary {
            machines,
            epsilon,
            delta: target / count,
            block: 1,
            emitted_in_block: 0,
            accepted_in_block: 0.0,
            done: false,
            emitted: Vec::new(),
            block_of: Vec::new(),
        })
    }

    /// `ε·Σ_{i<m} ((1+ε)/ε)^{i/m}`.
    fn first_target(machines: usize, epsilon: f64) -> f64 {
        let q = growth(epsilon);
        let m = machines as f64;
        epsilon * (0..machines).map(|i| q.powf(i as f64 / m)).sum::<f64>()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn emitted(&self) -> &[Job] {
        &self.emitted
    }

    /// Block each emitted job belongs to, parallel to `emitted`.
    pub fn blocks(&self) -> &[usize] {
        &self.block_of
    }

    fn block_spec(&self, block: usize) -> Block {
        let (m, eps) = (self.machines, self.epsilon);
        let q = growth(eps);
        let per_block = floor_tol(m as f64 * (1.0 + eps)) as usize;
        if block == 1 {
            Block {
                processing: self.delta,
                deadline: 1.0 + eps,
                max_jobs: floor_tol(m as f64 * (1.0 + eps) / self.delta) as usize,
                target: Some(Self::first_target(m, eps)),
            }
        } else if block <= m + 1 {
            let p = q.powf((block - 2) as f64 / m as f64);
            Block {
                processing: p,
                deadline: (1.0 + eps) * p,
                max_jobs: per_block,
                target: Some(p),
            }
        } else {
            let p = q * (1.0 - self.delta);
            Block {
                processing: p,
                deadline: (1.0 + eps) * p,
                max_jobs: per_block,
                target: None,
            }
        }
    }

    /// Best single block scheduled by wrap-around on `[0, d_block)`.
    pub fn constructive_opt(&self) -> ConstructiveOpt {
        let mut best = ConstructiveOpt {
            volume: 0.0,
            jobs: Vec::new(),
            schedule: Schedule::new(self.machines),
        };
        for block in 1..=self.machines + 2 {
            let spec = self.block_spec(block);
            let fit = floor_tol(self.machines as f64 * spec.deadline / spec.processing) as usize;
            let jobs: Vec<Job> = self
                .emitted
                .iter()
                .zip(&self.block_of)
                .filter(|(_, &b)| b == block)
                .map(|(j, _)| *j)
                .take(fit)
                .collect();
            let volume: f64 = jobs.iter().map(|j| j.processing).sum();
            if volume > best.volume {
                best = ConstructiveOpt {
                    volume,
                    schedule: wrap_schedule(&jobs, self.machines, 0.0, spec.deadline),
                    jobs,
                };
            }
        }
        best
    }
}

impl AdaptiveAdversary for PreemptiveAdversary {
    fn next_job(&mut self) -> Option<Job> {
        while !self.done {
            let spec = self.block_spec(self.block);
            if let Some(target) = spec.target {
                if self.accepted_in_block >= target - 1e-9 {
                    self.block += 1;
                    self.emitted_in_block = 0;
                    self.accepted_in_block = 0.0;
                    continue;
                }
            }
            if self.emitted_in_block >= spec.max_jobs {
                self.done = true;
                break;
            }
            let job = Job::new(self.emitted.len(), 0.0, spec.processing, spec.deadline);
            self.emitted.push(job);
            self.block_of.push(self.block);
            self.emitted_in_block += 1;
            return Some(job);
        }
        None
    }

    fn observe(&mut self, decision: &Decision) {
        if decision.accepted && self.block_of.get(decision.job) == Some(&self.block) {
            self.accepted_in_block += self.emitted[decision.job].processing;
        }
    }
}

/// One long job first, then groups of up to `m` tight jobs released when the
/// long job starts, with lengths growing by `c/m + 1` from `(c−1)/m`; the
/// adversary moves on when one job of a group is accepted and stops when a
/// whole group is rejected. The last group has `m` jobs of length `1/ε − δ`.
#[derive(Debug, Clone)]
pub struct NonPreemptiveAdversary {
    machines: usize,
    epsilon: f64,
    delta: f64,
    c: f64,
    group: usize,
    emitted_in_group: usize,
    accepted_in_group: usize,
    start: Option<Time>,
    done: bool,
    emitted: Vec<Job>,
    group_of: Vec<usize>,
}

impl NonPreemptiveAdversary {
    pub fn new(machines: usize, epsilon: f64, delta: f64) -> Result<Self> {
        if machines == 0 || !(epsilon > 0.0 && epsilon <= 1.0) || !(delta > 0.0 && delta < 1.0 / epsilon) {
            return Err(Error::InvalidArgument(format!(
                "adversary needs m >= 1, 0 < epsilon <= 1 and 0 < delta < 1/epsilon (got {machines}, {epsilon}, {delta})"
            )));
        }
        Ok(NonPreemptiveAdversary {
            machines,
            epsilon,
            delta,
            c: solve_c_lower(machines, epsilon)?,
            group: 1,
            emitted_in_group: 0,
            accepted_in_group: 0,
            start: None,
            done: false,
            emitted: Vec::new(),
            group_of: Vec::new(),
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn emitted(&self) -> &[Job] {
        &self.emitted
    }

    /// Deadline of the first job, late enough never to constrain anything.
    pub fn first_deadline(&self) -> Time {
        1.0 + (1.0 + self.epsilon) * (1.0 / self.epsilon + 1.0)
    }

    /// Job length in group `g`: 1 for the first job, then the geometric
    /// sequence, and `1/ε − δ` for the last group `m+1`.
    pub fn group_processing(&self, g: usize) -> f64 {
        let m = self.machines as f64;
        if g == 1 {
            1.0
        } else if g > self.machines {
            1.0 / self.epsilon - self.delta
        } else {
            (self.c - 1.0) / m * (self.c / m + 1.0).powi(g as i32 - 2)
        }
    }

    fn advance_group(&mut self) {
        self.group += 1;
        self.emitted_in_group = 0;
        self.accepted_in_group = 0;
    }

    /// `m` jobs of the last submitted group on their own machines from the
    /// long job's start, with the long job fitted before or after them.
    pub fn constructive_opt(&self) -> ConstructiveOpt {
        let mut s = Schedule::new(self.machines);
        let mut jobs = Vec::new();
        let Some(first) = self.emitted.first().copied() else {
            return ConstructiveOpt {
                volume: 0.0,
                jobs,
                schedule: s,
            };
        };
        let last = *self.group_of.last().expect("nonempty");
        let Some(t) = self.start.filter(|_| last > 1) else {
            s.push(Segment {
                machine: 0,
                job: first.id,
                start: 0.0,
                end: 1.0,
            });
            return ConstructiveOpt {
                volume: 1.0,
                jobs: vec![first],
                schedule: s,
            };
        };
        let group: Vec<Job> = self
            .emitted
            .iter()
            .zip(&self.group_of)
            .filter(|(_, &g)| g == last)
            .map(|(j, _)| *j)
            .take(self.machines)
            .collect();
        for (machine, job) in group.iter().enumerate() {
            s.push(Segment {
                machine,
                job: job.id,
                start: t,
                end: t + job.processing,
            });
            jobs.push(*job);
        }
        let busy_until = group.first().map_or(t, |j| t + j.processing);
        let slot = if t >= 1.0 {
            Some(0.0)
        } else if busy_until + 1.0 <= first.deadline {
            Some(busy_until)
        } else {
            None
        };
        if let Some(at) = slot {
            s.push(Segment {
                machine: 0,
                job: first.id,
                start: at,
                end: at + 1.0,
            });
            jobs.push(first);
        }
        let volume = jobs.iter().map(|j| j.processing).sum();
        ConstructiveOpt {
            volume,
            jobs,
            schedule: s,
        }
    }
}

impl AdaptiveAdversary for NonPreemptiveAdversary {
    fn next_job(&mut self) -> Option<Job> {
        while !self.done {
            if self.group == 1 {
                if self.emitted_in_group == 0 {
                    let job = Job::new(0, 0.0, 1.0, self.first_deadline());
                    self.emitted.push(job);
                    self.group_of.push(1);
                    self.emitted_in_group = 1;
                    return Some(job);
                }
                if self.start.is_none() {
                    self.done = true;
                    break;
                }
                self.advance_group();
                continue;
            }
            let last_group = self.group > self.machines;
            if !last_group && self.accepted_in_group > 0 {
                self.advance_group();
                continue;
            }
            if self.emitted_in_group >= self.machines {
                self.done = true;
                break;
            }
            let t = self.start.expect("first job accepted");
            let p = self.group_processing(self.group);
            let job = Job::tight(self.emitted.len(), t, p, self.epsilon);
            self.emitted.push(job);
            self.group_of.push(self.group);
            self.emitted_in_group += 1;
            return Some(job);
        }
        None
    }

    fn observe(&mut self, decision: &Decision) {
        if !decision.accepted {
            return;
        }
        if decision.job == 0 && self.group == 1 {
            // a policy that reports no start is taken to start at its decision time
            self.start = Some(decision.start.unwrap_or(decision.time));
        } else if self.group_of.get(decision.job) == Some(&self.group) {
            self.accepted_in_group += 1;
        }
    }
}

/// The constant `c` of the non-preemptive lower bound: the root `c > 1` of
/// `c/m = (m/((c−1)·ε))^{1/(m−1)} − 1`, and `1 + 1/ε` for one machine.
pub fn solve_c_lower(machines: usize, epsilon: f64) -> Result<f64> {
    if machines == 0 || epsilon <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "need m >= 1 and epsilon > 0, got {machines}, {epsilon}"
        )));
    }
    if machines == 1 {
        return Ok(1.0 + 1.0 / epsilon);
    }
    let m = machines as f64;
    let g = |c: f64| c / m - (m / ((c - 1.0) * epsilon)).powf(1.0 / (m - 1.0)) + 1.0;
    let mut lo = 1.0 + 1e-12;
    let mut hi = 2.0 * m * (1.0 / epsilon).powf(1.0 / m);
    if g(hi) <= 0.0 {
        hi *= 4.0;
        if g(hi) <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "no root bracketed for m={machines}, epsilon={epsilon}"
            )));
        }
    }
    if g(lo) >= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "lower bracket end is not below the root for m={machines}, epsilon={epsilon}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `max{m(1+ε), ⌊m(1+ε)⌋ + ε/(1+ε)·((1+ε)/ε)^{1/m}}`, the improved
/// numerator of the preemptive lower bound.
pub fn strengthened_preemptive_bound(machines: usize, epsilon: f64) -> f64 {
    let m = machines as f64;
    let whole = m * (1.0 + epsilon);
    let extra = epsilon / (1.0 + epsilon) * growth(epsilon).powf(1.0 / m);
    whole.max(floor_tol(whole) + extra)
}
