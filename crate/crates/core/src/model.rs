//! Jobs, instances, schedules and decision logs shared by every simulator.
//!
//! Time is an `f64`. All comparisons go through [`TOL`], an absolute
//! tolerance on a scale where the smallest processing time is about one.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Time = f64;

/// Global comparison tolerance.
pub const TOL: f64 = 1e-9;

#[inline]
pub fn approx_le(a: f64, b: f64) -> bool {
    a <= b + TOL
}

#[inline]
pub fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

/// One deadline-constrained job.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: usize,
    #[serde(rename = "r")]
    pub release: Time,
    #[serde(rename = "p")]
    pub processing: Time,
    #[serde(rename = "d")]
    pub deadline: Time,
}

impl Job {
    pub fn new(id: usize, release: Time, processing: Time, deadline: Time) -> Self {
        Job {
            id,
            release,
            processing,
            deadline,
        }
    }

    /// A job whose window is exactly `(1+ε)·p` long.
    pub fn tight(id: usize, release: Time, processing: Time, epsilon: f64) -> Self {
        Job::new(id, release, processing, release + (1.0 + epsilon) * processing)
    }

    pub fn satisfies_slack(&self, epsilon: f64) -> bool {
        approx_le((1.0 + epsilon) * self.processing, self.deadline - self.release)
    }

    /// Latest time the job can start and still finish by its deadline.
    pub fn latest_start(&self) -> Time {
        self.deadline - self.processing
    }
}

/// Slack factor, machine count and the release-ordered submission sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub epsilon: f64,
    pub machines: usize,
    pub jobs: Vec<Job>,
}

impl Instance {
    pub fn new(epsilon: f64, machines: usize, jobs: Vec<Job>) -> Self {
        Instance {
            epsilon,
            machines,
            jobs,
        }
    }

    pub fn total_processing(&self) -> f64 {
        self.jobs.iter().map(|j| j.processing).sum()
    }

    pub fn job(&self, id: usize) -> Option<&Job> {
        self.jobs.get(id).filter(|j| j.id == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceViolation {
    NonPositiveEpsilon(f64),
    NoMachines,
    NonDenseId { position: usize, id: usize },
    NegativeRelease { job: usize },
    NonPositiveProcessing { job: usize },
    DeadlineNotAfterRelease { job: usize },
    Slack { job: usize, window: f64, required: f64 },
    Ordering { job: usize, release: Time, previous: Time },
}

impl fmt::Display for InstanceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use InstanceViolation::*;
        match self {
            NonPositiveEpsilon(e) => write!(f, "epsilon must be positive, got {e}"),
            NoMachines => write!(f, "machine count must be at least 1"),
            NonDenseId { position, id } => {
                write!(f, "job at position {position} has id {id}, expected {position}")
            }
            NegativeRelease { job } => write!(f, "job {job}: negative release"),
            NonPositiveProcessing { job } => write!(f, "job {job}: processing time must be positive"),
            DeadlineNotAfterRelease { job } => write!(f, "job {job}: deadline not after release"),
            Slack {
                job,
                window,
                required,
            } => write!(f, "job {job}: slack violated, window {window} < (1+eps)p = {required}"),
            Ordering {
                job,
                release,
                previous,
            } => write!(f, "job {job}: release {release} precedes previous release {previous}"),
        }
    }
}

/// Every way `instance` breaks the model's rules. Empty means valid.
/// Comparisons are written so that NaN fields fail them.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate_instance(instance: &Instance) -> Vec<InstanceViolation> {
    let mut out = Vec::new();
    if !(instance.epsilon > 0.0) {
        out.push(InstanceViolation::NonPositiveEpsilon(instance.epsilon));
    }
    if instance.machines == 0 {
        out.push(InstanceViolation::NoMachines);
    }
    let mut previous: Option<Time> = None;
    for (position, job) in instance.jobs.iter().enumerate() {
        if job.id != position {
            out.push(InstanceViolation::NonDenseId {
                position,
                id: job.id,
            });
        }
        if job.release < 0.0 {
            out.push(InstanceViolation::NegativeRelease { job: job.id });
        }
        if !(job.processing > 0.0) {
            out.push(InstanceViolation::NonPositiveProcessing { job: job.id });
        }
        if !(job.deadline > job.release) {
            out.push(InstanceViolation::DeadlineNotAfterRelease { job: job.id });
        }
        if instance.epsilon > 0.0 && !job.satisfies_slack(instance.epsilon) {
            out.push(InstanceViolation::Slack {
                job: job.id,
                window: job.deadline - job.release,
                required: (1.0 + instance.epsilon) * job.processing,
            });
        }
        if let Some(prev) = previous {
            if job.release < prev {
                out.push(InstanceViolation::Ordering {
                    job: job.id,
                    release: job.release,
                    previous: prev,
                });
            }
        }
        previous = Some(job.release);
    }
    out
}

/// A piece of a job executed on one machine over `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub machine: usize,
    pub job: usize,
    pub start: Time,
    pub end: Time,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schedule {
    pub machines: usize,
    pub segments: Vec<Segment>,
}

impl Schedule {
    pub fn new(machines: usize) -> Self {
        Schedule {
            machines,
            segments: Vec::new(),
        }
    }

    pub fn push(&mut self, seg: Segment) {
        if seg.end > seg.start {
            self.segments.push(seg);
        }
    }

    /// Total executed processing time.
    pub fn volume(&self) -> f64 {
        self.segments.iter().map(Segment::len).sum()
    }

    /// Processing time executed inside `[0, t)`.
    pub fn volume_before(&self, t: Time) -> f64 {
        self.segments
            .iter()
            .map(|s| (s.end.min(t) - s.start).max(0.0))
            .sum()
    }

    pub fn executed_per_job(&self) -> HashMap<usize, f64> {
        let mut out = HashMap::new();
        for s in &self.segments {
            *out.entry(s.job).or_insert(0.0) += s.len();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleViolation {
    MachineOutOfRange { machine: usize },
    UnknownJob { job: usize },
    MachineOverlap { machine: usize, first: usize, second: usize, at: Time },
    SelfParallel { job: usize, at: Time },
    BeforeRelease { job: usize, start: Time },
    AfterDeadline { job: usize, end: Time },
    UnderCompleted { job: usize, executed: f64, required: f64 },
    OverCompleted { job: usize, executed: f64, required: f64 },
}

impl fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ScheduleViolation::*;
        match self {
            MachineOutOfRange { machine } => write!(f, "machine {machine} out of range"),
            UnknownJob { job } => write!(f, "segment references job {job} which is not accepted"),
            MachineOverlap {
                machine,
                first,
                second,
                at,
            } => write!(f, "machine {machine}: jobs {first} and {second} overlap at {at}"),
            SelfParallel { job, at } => write!(f, "job {job} runs in parallel with itself at {at}"),
            BeforeRelease { job, start } => write!(f, "job {job} starts at {start} before release"),
            AfterDeadline { job, end } => write!(f, "job {job} runs until {end} past its deadline"),
            UnderCompleted {
                job,
                executed,
                required,
            } => write!(f, "job {job} executed {executed} of {required}"),
            OverCompleted {
                job,
                executed,
                required,
            } => write!(f, "job {job} executed {executed}, more than {required}"),
        }
    }
}

/// Checks `schedule` against the commitment for the `accepted` jobs.
pub fn verify_schedule(schedule: &Schedule, accepted: &[Job]) -> Vec<ScheduleViolation> {
    let mut out = Vec::new();
    let by_id: HashMap<usize, &Job> = accepted.iter().map(|j| (j.id, j)).collect();
    let mut per_machine: BTreeMap<usize, Vec<&Segment>> = BTreeMap::new();
    let mut per_job: BTreeMap<usize, Vec<&Segment>> = BTreeMap::new();

    for seg in &schedule.segments {
        if seg.machine >= schedule.machines {
            out.push(ScheduleViolation::MachineOutOfRange {
                machine: seg.machine,
            });
        }
        match by_id.get(&seg.job) {
            None => out.push(ScheduleViolation::UnknownJob { job: seg.job }),
            Some(job) => {
                if seg.start < job.release - TOL {
                    out.push(ScheduleViolation::BeforeRelease {
                        job: job.id,
                        start: seg.start,
                    });
                }
                if seg.end > job.deadline + TOL {
                    out.push(ScheduleViolation::AfterDeadline {
                        job: job.id,
                        end: seg.end,
                    });
                }
            }
        }
        per_machine.entry(seg.machine).or_default().push(seg);
        per_job.entry(seg.job).or_default().push(seg);
    }

    for (machine, mut segs) in per_machine {
        segs.sort_by(|a, b| a.start.total_cmp(&b.start));
        for w in segs.windows(2) {
            if w[1].start < w[0].end - TOL {
                out.push(ScheduleViolation::MachineOverlap {
                    machine,
                    first: w[0].job,
                    second: w[1].job,
                    at: w[1].start,
                });
            }
        }
    }
    for (job, mut segs) in per_job {
        segs.sort_by(|a, b| a.start.total_cmp(&b.start));
        for w in segs.windows(2) {
            if w[1].start < w[0].end - TOL {
                out.push(ScheduleViolation::SelfParallel {
                    job,
                    at: w[1].start,
                });
            }
        }
    }

    let executed = schedule.executed_per_job();
    for job in accepted {
        let done = executed.get(&job.id).copied().unwrap_or(0.0);
        if done < job.processing - TOL {
            out.push(ScheduleViolation::UnderCompleted {
                job: job.id,
                executed: done,
                required: job.processing,
            });
        } else if done > job.processing + TOL {
            out.push(ScheduleViolation::OverCompleted {
                job: job.id,
                executed: done,
                required: job.processing,
            });
        }
    }
    out
}

/// The admission decision for one job (`U_j = 0` iff `accepted`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub job: usize,
    pub accepted: bool,
    pub time: Time,
    /// The deadline threshold in force when the decision was made
    /// (`d_min` for the preemptive algorithms, `d_lim` for the non-preemptive ones).
    pub threshold: Option<Time>,
    pub machine: Option<usize>,
    pub start: Option<Time>,
}

impl Decision {
    pub fn reject(job: usize, time: Time, threshold: Option<Time>) -> Self {
        Decision {
            job,
            accepted: false,
            time,
            threshold,
            machine: None,
            start: None,
        }
    }

    pub fn accept(job: usize, time: Time, threshold: Option<Time>) -> Self {
        Decision {
            job,
            accepted: true,
            time,
            threshold,
            machine: None,
            start: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecisionLog {
    pub decisions: Vec<Decision>,
}

impl DecisionLog {
    pub fn push(&mut self, d: Decision) {
        self.decisions.push(d);
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn is_accepted(&self, job: usize) -> bool {
        self.decisions.iter().any(|d| d.job == job && d.accepted)
    }

    pub fn accepted_ids(&self) -> Vec<usize> {
        self.decisions
            .iter()
            .filter(|d| d.accepted)
            .map(|d| d.job)
            .collect()
    }

    /// Accepted jobs, looked up in `jobs` by id.
    pub fn accepted_jobs(&self, jobs: &[Job]) -> Vec<Job> {
        let by_id: HashMap<usize, &Job> = jobs.iter().map(|j| (j.id, j)).collect();
        self.accepted_ids()
            .into_iter()
            .filter_map(|id| by_id.get(&id).copied().copied())
            .collect()
    }

    /// True when there is exactly one entry per job of `instance`.
    pub fn covers(&self, instance: &Instance) -> bool {
        let mut seen = vec![0usize; instance.jobs.len()];
        for d in &self.decisions {
            match seen.get_mut(d.job) {
                Some(c) => *c += 1,
                None => return false,
            }
        }
        seen.iter().all(|&c| c == 1)
    }
}

/// Total processing time of the accepted jobs, `Σ p_j·(1−U_j)`.
pub fn utilization(log: &DecisionLog, instance: &Instance) -> f64 {
    log.decisions
        .iter()
        .filter(|d| d.accepted)
        .filter_map(|d| instance.job(d.job))
        .map(|j| j.processing)
        .sum()
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    epsilon: f64,
    machines: usize,
}

/// Reads the JSON-lines instance format: a header line, then one job per line.
pub fn read_instance<R: BufRead>(reader: R) -> Result<Instance> {
    let mut header: Option<Header> = None;
    let mut jobs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        if header.is_none() {
            header = Some(
                serde_json::from_str(trimmed).map_err(|source| Error::Parse {
                    line: lineno,
                    source,
                })?,
            );
        } else {
            jobs.push(
                serde_json::from_str::<Job>(trimmed).map_err(|source| Error::Parse {
                    line: lineno,
                    source,
                })?,
            );
        }
    }
    let header = header.ok_or_else(|| Error::InvalidArgument("instance file has no header".into()))?;
    if header.epsilon > 1.0 {
        log::warn!(
            "epsilon = {} > 1: simulations run, but competitive bounds are only reported for epsilon <= 1",
            header.epsilon
        );
    }
    let instance = Instance::new(header.epsilon, header.machines, jobs);
    let violations = validate_instance(&instance);
    if violations.is_empty() {
        Ok(instance)
    } else {
        Err(Error::InvalidInstance(violations))
    }
}

pub fn write_instance<W: Write>(mut w: W, instance: &Instance) -> Result<()> {
    let header = Header {
        epsilon: instance.epsilon,
        machines: instance.machines,
    };
    writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes"))?;
    for job in &instance.jobs {
        writeln!(w, "{}", serde_json::to_string(job).expect("job serializes"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(eps: f64, jobs: Vec<Job>) -> Instance {
        Instance::new(eps, 1, jobs)
    }

    #[test]
    fn tight_slack_boundary_is_valid() {
        let i = inst(1.0, vec![Job::new(0, 0.0, 1.0, 2.0)]);
        assert!(validate_instance(&i).is_empty());
    }

    #[test]
    fn slack_violation_is_reported() {
        let i = inst(1.0, vec![Job::new(0, 0.0, 1.0, 1.9)]);
        let v = validate_instance(&i);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], InstanceViolation::Slack { job: 0, .. }));
    }

    #[test]
    fn ordering_violation_is_reported() {
        let i = inst(
            0.5,
            vec![Job::new(0, 3.0, 1.0, 5.0), Job::new(1, 1.0, 1.0, 3.0)],
        );
        let v = validate_instance(&i);
        assert_eq!(
            v,
            vec![InstanceViolation::Ordering {
                job: 1,
                release: 1.0,
                previous: 3.0
            }]
        );
    }

    #[test]
    fn positivity_and_ids() {
        let i = Instance::new(
            0.0,
            0,
            vec![Job::new(3, -1.0, 0.0, -1.0)],
        );
        let v = validate_instance(&i);
        assert!(v.contains(&InstanceViolation::NonPositiveEpsilon(0.0)));
        assert!(v.contains(&InstanceViolation::NoMachines));
        assert!(v.contains(&InstanceViolation::NonDenseId { position: 0, id: 3 }));
        assert!(v.contains(&InstanceViolation::NegativeRelease { job: 3 }));
        assert!(v.contains(&InstanceViolation::NonPositiveProcessing { job: 3 }));
        assert!(v.contains(&InstanceViolation::DeadlineNotAfterRelease { job: 3 }));
    }

    #[test]
    fn utilization_sums_accepted() {
        let i = Instance::new(
            1.0,
            4,
            vec![
                Job::new(0, 0.0, 1.0, 2.0),
                Job::new(1, 0.0, 2.5, 5.0),
                Job::new(2, 0.0, 4.0, 8.0),
            ],
        );
        let mut log = DecisionLog::default();
        for j in 0..3 {
            log.push(Decision::reject(j, 0.0, None));
        }
        assert_eq!(utilization(&log, &i), 0.0);

        let mut log = DecisionLog::default();
        log.push(Decision::accept(0, 0.0, None));
        log.push(Decision::accept(1, 0.0, None));
        log.push(Decision::reject(2, 0.0, None));
        assert_eq!(utilization(&log, &i), 3.5);
        assert!(log.covers(&i));

        let mut log = DecisionLog::default();
        log.push(Decision::accept(0, 0.0, None));
        assert_eq!(utilization(&log, &i), 1.0);
        assert!(!log.covers(&i));
    }

    #[test]
    fn empty_schedule_is_valid() {
        assert!(verify_schedule(&Schedule::new(1), &[]).is_empty());
    }

    #[test]
    fn under_completion_is_reported() {
        let job = Job::new(0, 0.0, 1.0, 2.0);
        let mut s = Schedule::new(1);
        s.push(Segment {
            machine: 0,
            job: 0,
            start: 0.0,
            end: 0.5,
        });
        let v = verify_schedule(&s, &[job]);
        assert_eq!(
            v,
            vec![ScheduleViolation::UnderCompleted {
                job: 0,
                executed: 0.5,
                required: 1.0
            }]
        );
    }

    #[test]
    fn machine_overlap_is_reported() {
        let jobs = [Job::new(0, 0.0, 2.0, 4.0), Job::new(1, 0.0, 2.0, 4.0)];
        let mut s = Schedule::new(1);
        s.push(Segment {
            machine: 0,
            job: 0,
            start: 0.0,
            end: 2.0,
        });
        s.push(Segment {
            machine: 0,
            job: 1,
            start: 1.0,
            end: 3.0,
        });
        let v = verify_schedule(&s, &jobs);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], ScheduleViolation::MachineOverlap { machine: 0, .. }));
    }

    #[test]
    fn self_parallel_and_window_violations() {
        let job = Job::new(0, 1.0, 2.0, 4.0);
        let mut s = Schedule::new(2);
        s.push(Segment {
            machine: 0,
            job: 0,
            start: 0.5,
            end: 1.5,
        });
        s.push(Segment {
            machine: 1,
            job: 0,
            start: 1.0,
            end: 1.5,
        });
        s.push(Segment {
            machine: 1,
            job: 0,
            start: 3.5,
            end: 4.0001,
        });
        let v = verify_schedule(&s, &[job]);
        assert!(v.contains(&ScheduleViolation::BeforeRelease { job: 0, start: 0.5 }));
        assert!(v.iter().any(|x| matches!(x, ScheduleViolation::SelfParallel { job: 0, .. })));
        assert!(v.iter().any(|x| matches!(x, ScheduleViolation::AfterDeadline { job: 0, .. })));
    }

    #[test]
    fn instance_file_round_trip_and_rejection() {
        let i = Instance::new(
            0.5,
            2,
            vec![Job::new(0, 0.0, 1.0, 1.5), Job::new(1, 0.25, 2.0, 4.0)],
        );
        let mut buf = Vec::new();
        write_instance(&mut buf, &i).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("{\"epsilon\":0.5,\"machines\":2}\n"));
        assert!(text.contains("{\"id\":1,\"r\":0.25,\"p\":2.0,\"d\":4.0}"));
        assert_eq!(read_instance(&buf[..]).unwrap(), i);

        let bad = "{\"epsilon\": 1.0, \"machines\": 1}\n{\"id\": 0, \"r\": 0, \"p\": 1, \"d\": 1.9}\n";
        assert!(matches!(
            read_instance(bad.as_bytes()),
            Err(Error::InvalidInstance(_))
        ));
        assert!(matches!(
            read_instance("{\"epsilon\": 1.0}\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn schedule_volume_is_permutation_invariant(
                lens in prop::collection::vec((0usize..3, 0.0f64..10.0, 0.01f64..3.0), 0..20),
                seed in any::<u64>(),
            ) {
                let mut s = Schedule::new(3);
                for (i, (m, st, l)) in lens.iter().enumerate() {
                    s.push(Segment { machine: *m, job: i, start: *st, end: st + l });
                }
                let base = s.volume();
                let mut shuffled = s.clone();
                let n = shuffled.segments.len();
                // deterministic Fisher-Yates driven by the seed
                let mut x = seed | 1;
                for i in (1..n).rev() {
                    x ^= x << 13; x ^= x >> 7; x ^= x << 17;
                    let k = (x % (i as u64 + 1)) as usize;
                    shuffled.segments.swap(i, k);
                }
                prop_assert!((shuffled.volume() - base).abs() < 1e-9);
            }
        }
    }
}
