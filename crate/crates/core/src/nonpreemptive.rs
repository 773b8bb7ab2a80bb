//! Non-preemptive scheduling with immediate commitment to a machine and a
//! start time: the load-threshold algorithm, its partitioned and randomized
//! variants, and a greedy baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Decision, DecisionLog, Instance, Job, Schedule, Segment, Time, TOL};
use crate::online::OnlinePolicy;
use crate::vmin::growth;

fn scaled_le(a: f64, b: f64) -> bool {
    a <= b + TOL * (1.0 + a.abs().max(b.abs()))
}

/// The machine and start time an accepted job is committed to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommittedStart {
    pub job: usize,
    pub machine: usize,
    pub start: Time,
}

/// `t + max_i l_i·((1+ε)/ε)^{i/m}` over loads sorted nonincreasing, `i` 1-based.
pub fn d_lim(sorted_loads: &[f64], t: Time, epsilon: f64) -> Time {
    let m = sorted_loads.len() as f64;
    let q = growth(epsilon);
    let worst = sorted_loads
        .iter()
        .enumerate()
        .map(|(i, &l)| l * q.powf((i + 1) as f64 / m))
        .fold(0.0, f64::max);
    t + worst
}

fn sorted_desc(mut loads: Vec<f64>) -> Vec<f64> {
    loads.sort_by(|a, b| b.total_cmp(a));
    loads
}

/// Committed work per machine. Each machine is busy until `free_at`; its
/// outstanding load at time `t` is `max(free_at − t, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineLoads {
    free_at: Vec<Time>,
    clock: Time,
}

impl MachineLoads {
    pub fn new(machines: usize) -> Self {
        MachineLoads {
            free_at: vec![0.0; machines],
            clock: 0.0,
        }
    }

    pub fn machines(&self) -> usize {
        self.free_at.len()
    }

    pub fn clock(&self) -> Time {
        self.clock
    }

    pub fn advance_to(&mut self, t: Time) {
        self.clock = self.clock.max(t);
    }

    /// Outstanding load of each machine, by machine index.
    pub fn by_machine(&self) -> Vec<f64> {
        self.free_at.iter().map(|&f| (f - self.clock).max(0.0)).collect()
    }

    /// Outstanding loads, largest first.
    pub fn sorted(&self) -> Vec<f64> {
        sorted_desc(self.by_machine())
    }

    /// Commits `p` units of work to `machine`, returning the start time.
    fn push(&mut self, machine: usize, p: f64) -> Time {
        let start = self.free_at[machine].max(self.clock);
        self.free_at[machine] = start + p;
        start
    }
}

/// Final state of a non-preemptive run.
#[derive(Debug, Clone, Default)]
pub struct NonPreemptiveRun {
    pub log: DecisionLog,
    pub starts: Vec<CommittedStart>,
    pub accepted: Vec<Job>,
    pub trace: Vec<String>,
}

impl NonPreemptiveRun {
    pub fn accepted_volume(&self) -> f64 {
        self.accepted.iter().map(|j| j.processing).sum()
    }

    /// One segment per accepted job on `machines` machines.
    pub fn schedule(&self, machines: usize) -> Schedule {
        let mut s = Schedule::new(machines);
        for c in &self.starts {
            if let Some(j) = self.accepted.iter().find(|j| j.id == c.job) {
                s.push(Segment {
                    machine: c.machine,
                    job: c.job,
                    start: c.start,
                    end: c.start + j.processing,
                });
            }
        }
        s
    }
}

/// The load-threshold algorithm: reject a job whose deadline is below
/// `d_lim`, otherwise commit it to the machine that keeps `d_lim` smallest.
#[derive(Debug, Clone)]
pub struct OnlineAllocation {
    epsilon: f64,
    loads: MachineLoads,
    /// Machine numbers reported in decisions start here.
    machine_offset: usize,
    check: bool,
    run: NonPreemptiveRun,
}

impl OnlineAllocation {
    pub fn new(machines: usize, epsilon: f64) -> Self {
        OnlineAllocation {
            epsilon,
            loads: MachineLoads::new(machines),
            machine_offset: 0,
            check: true,
            run: NonPreemptiveRun::default(),
        }
    }

    fn with_offset(machines: usize, epsilon: f64, offset: usize) -> Self {
        OnlineAllocation {
            machine_offset: offset,
            ..OnlineAllocation::new(machines, epsilon)
        }
    }

    /// Disables the per-event invariant checks.
    pub fn unchecked(mut self) -> Self {
        self.check = false;
        self
    }

    pub fn loads(&self) -> &MachineLoads {
        &self.loads
    }

    pub fn current_d_lim(&self) -> Time {
        d_lim(&self.loads.sorted(), self.loads.clock(), self.epsilon)
    }

    /// Two largest loads must cover `(d_lim − t)·(ε/(1+ε))^{1/m}`; with a
    /// single machine the second load is taken as zero.
    fn check_loads(&self) -> Result<()> {
        if !self.check {
            return Ok(());
        }
        let sorted = self.loads.sorted();
        let t = self.loads.clock();
        let m = sorted.len() as f64;
        let top2 = sorted[0] + sorted.get(1).copied().unwrap_or(0.0);
        let need = (d_lim(&sorted, t, self.epsilon) - t) * growth(self.epsilon).powf(-1.0 / m);
        if !scaled_le(need, top2) {
            return Err(Error::invariant(
                t,
                format!("two largest loads {top2} fall short of {need}"),
            ));
        }
        Ok(())
    }

    /// A rejected job's window fits within the two largest loads scaled by
    /// `((1+ε)/ε)^{1/m}`.
    fn check_rejection(&self, job: &Job) -> Result<()> {
        if !self.check {
            return Ok(());
        }
        let sorted = self.loads.sorted();
        let m = sorted.len() as f64;
        let top2 = sorted[0] + sorted.get(1).copied().unwrap_or(0.0);
        let bound = top2 * growth(self.epsilon).powf(1.0 / m);
        if !scaled_le(job.deadline - job.release, bound) {
            return Err(Error::invariant(
                job.release,
                format!(
                    "rejected job {} has window {} beyond the usable bound {bound}",
                    job.id,
                    job.deadline - job.release
                ),
            ));
        }
        Ok(())
    }

    /// Decides `job` with the clock at its release. Returns the local machine
    /// and start time on acceptance.
    fn decide(&mut self, job: &Job) -> Result<Option<(usize, Time)>> {
        self.check_loads()?;
        let t = self.loads.clock();
        let threshold = self.current_d_lim();
        if job.deadline < threshold - TOL {
            self.check_rejection(job)?;
            return Ok(None);
        }

        let loads = self.loads.by_machine();
        let mut best: Option<(f64, f64, usize)> = None;
        for (i, &l) in loads.iter().enumerate() {
            // only placements that meet the deadline
            if t + l + job.processing > job.deadline + TOL {
                continue;
            }
            let mut after = loads.clone();
            after[i] += job.processing;
            let lim = d_lim(&sorted_desc(after), t, self.epsilon);
            let better = match best {
                None => true,
                Some((bl, bload, _)) => lim < bl - TOL || ((lim - bl).abs() <= TOL && l < bload - TOL),
            };
            if better {
                best = Some((lim, l, i));
            }
        }
        let Some((_, _, machine)) = best else {
            return Err(Error::invariant(
                t,
                format!("accepted job {} fits on no machine", job.id),
            ));
        };
        let start = self.loads.push(machine, job.processing);
        self.check_loads()?;
        Ok(Some((machine, start)))
    }

    fn record(&mut self, job: &Job, placed: Option<(usize, Time)>, threshold: Time) -> Decision {
        let t = self.loads.clock();
        let decision = match placed {
            Some((machine, start)) => {
                let machine = machine + self.machine_offset;
                self.run.starts.push(CommittedStart {
                    job: job.id,
                    machine,
                    start,
                });
                self.run.accepted.push(*job);
                self.run.trace.push(format!(
                    "t={t:.9} job={} d_lim={threshold:.9} machine={machine} start={start:.9}",
                    job.id
                ));
                Decision {
                    machine: Some(machine),
                    start: Some(start),
                    ..Decision::accept(job.id, t, Some(threshold))
                }
            }
            None => {
                self.run.trace.push(format!(
                    "t={t:.9} job={} d_lim={threshold:.9} rejected",
                    job.id
                ));
                Decision::reject(job.id, t, Some(threshold))
            }
        };
        self.run.log.push(decision);
        decision
    }

    pub fn finish(self) -> NonPreemptiveRun {
        self.run
    }
}

impl OnlinePolicy for OnlineAllocation {
    fn offer(&mut self, job: &Job) -> Result<Decision> {
        if job.release < self.loads.clock() - TOL {
            return Err(Error::ClockRegression {
                job: job.id,
                release: job.release,
                clock: self.loads.clock(),
            });
        }
        self.loads.advance_to(job.release);
        let threshold = self.current_d_lim();
        let placed = self.decide(job)?;
        Ok(self.record(job, placed, threshold))
    }
}

/// Group size for the partitioned variant: `round(ln((1+ε)/ε))`, at least 1
/// and at most `machines`.
pub fn partition_group_size(machines: usize, epsilon: f64) -> usize {
    (growth(epsilon).ln().round() as usize).clamp(1, machines.max(1))
}

/// Machines split into groups of `partition_group_size`, the last group
/// taking any remainder. Each job is offered to the groups in order and is
/// accepted by the first one that takes it.
#[derive(Debug, Clone)]
pub struct Partitioned {
    groups: Vec<OnlineAllocation>,
    log: DecisionLog,
}

impl Partitioned {
    pub fn new(machines: usize, epsilon: f64) -> Self {
        let g = partition_group_size(machines, epsilon);
        let mut groups = Vec::new();
        let mut offset = 0;
        while offset < machines {
            let size = g.min(machines - offset);
            groups.push(OnlineAllocation::with_offset(size, epsilon, offset));
            offset += size;
        }
        Partitioned {
            groups,
            log: DecisionLog::default(),
        }
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.loads.machines()).collect()
    }

    pub fn finish(self) -> NonPreemptiveRun {
        let mut run = NonPreemptiveRun {
            log: self.log,
            ..NonPreemptiveRun::default()
        };
        for g in self.groups {
            let part = g.finish();
            run.starts.extend(part.starts);
            run.accepted.extend(part.accepted);
            run.trace.extend(part.trace);
        }
        run.accepted.sort_by_key(|j| j.id);
        run.starts.sort_by_key(|c| c.job);
        run
    }
}

impl OnlinePolicy for Partitioned {
    fn offer(&mut self, job: &Job) -> Result<Decision> {
        let mut last = None;
        for g in &mut self.groups {
            let d = g.offer(job)?;
            if d.accepted {
                self.log.push(d);
                return Ok(d);
            }
            last = Some(d);
        }
        let d = last.expect("at least one group");
        self.log.push(d);
        Ok(d)
    }
}

/// Virtual machine count for the randomized single-machine variant: the
/// value among `⌊ln((1+ε)/ε)⌋` and `⌈ln((1+ε)/ε)⌉` (at least 1) minimizing
/// `m²·((1+ε)/ε)^{1/m} + m`.
pub fn virtual_machines(epsilon: f64) -> usize {
    let l = growth(epsilon).ln();
    let cost = |m: usize| {
        let mf = m as f64;
        mf * mf * growth(epsilon).powf(1.0 / mf) + mf
    };
    let lo = (l.floor() as usize).max(1);
    let hi = (l.ceil() as usize).max(1);
    if cost(hi) < cost(lo) {
        hi
    } else {
        lo
    }
}

/// Runs the load-threshold algorithm on virtual machines and keeps only the
/// jobs committed to one of them, chosen up front.
#[derive(Debug, Clone)]
pub struct RandomizedSingle {
    inner: OnlineAllocation,
    pick: usize,
    log: DecisionLog,
}

impl RandomizedSingle {
    pub fn with_pick(epsilon: f64, pick: usize) -> Result<Self> {
        let vm = virtual_machines(epsilon);
        if pick >= vm {
            return Err(Error::InvalidArgument(format!(
                "pick {pick} out of range for {vm} virtual machines"
            )));
        }
        Ok(RandomizedSingle {
            inner: OnlineAllocation::new(vm, epsilon),
            pick,
            log: DecisionLog::default(),
        })
    }

    pub fn with_seed(epsilon: f64, seed: u64) -> Self {
        let vm = virtual_machines(epsilon);
        let pick = ChaCha8Rng::seed_from_u64(seed).gen_range(0..vm);
        RandomizedSingle::with_pick(epsilon, pick).expect("pick in range")
    }

    pub fn pick(&self) -> usize {
        self.pick
    }

    /// The virtual run with every virtual machine's jobs.
    pub fn virtual_run(&self) -> &NonPreemptiveRun {
        &self.inner.run
    }

    pub fn finish(self) -> NonPreemptiveRun {
        let pick = self.pick;
        let virt = self.inner.finish();
        let starts: Vec<CommittedStart> = virt
            .starts
            .into_iter()
            .filter(|c| c.machine == pick)
            .map(|c| CommittedStart { machine: 0, ..c })
            .collect();
        let accepted = virt
            .accepted
            .into_iter()
            .filter(|j| starts.iter().any(|c| c.job == j.id))
            .collect();
        NonPreemptiveRun {
            log: self.log,
            starts,
            accepted,
            trace: virt.trace,
        }
    }
}

impl OnlinePolicy for RandomizedSingle {
    fn offer(&mut self, job: &Job) -> Result<Decision> {
        let d = self.inner.offer(job)?;
        let kept = if d.accepted && d.machine == Some(self.pick) {
            Decision {
                machine: Some(0),
                ..d
            }
        } else {
            Decision::reject(d.job, d.time, d.threshold)
        };
        self.log.push(kept);
        Ok(kept)
    }
}

/// Accepts a job whenever some machine can finish it in time, placing it on
/// the machine that completes it earliest.
#[derive(Debug, Clone)]
pub struct GreedyNonPreemptive {
    loads: MachineLoads,
    run: NonPreemptiveRun,
}

impl GreedyNonPreemptive {
    pub fn new(machines: usize) -> Self {
        GreedyNonPreemptive {
            loads: MachineLoads::new(machines),
            run: NonPreemptiveRun::default(),
        }
    }

    pub fn finish(self) -> NonPreemptiveRun {
        self.run
    }
}

impl OnlinePolicy for GreedyNonPreemptive {
    fn offer(&mut self, job: &Job) -> Result<Decision> {
        if job.release < self.loads.clock() - TOL {
            return Err(Error::ClockRegression {
                job: job.id,
                release: job.release,
                clock: self.loads.clock(),
            });
        }
        self.loads.advance_to(job.release);
        let t = self.loads.clock();
        let loads = self.loads.by_machine();
        let mut best: Option<(f64, usize)> = None;
        for (i, &l) in loads.iter().enumerate() {
            if best.is_none_or(|(bl, _)| l < bl - TOL) {
                best = Some((l, i));
            }
        }
        let decision = match best {
            Some((l, machine)) if t + l + job.processing <= job.deadline + TOL => {
                let start = self.loads.push(machine, job.processing);
                self.run.starts.push(CommittedStart {
                    job: job.id,
                    machine,
                    start,
                });
                self.run.accepted.push(*job);
                Decision {
                    machine: Some(machine),
                    start: Some(start),
                    ..Decision::accept(job.id, t, None)
                }
            }
            _ => Decision::reject(job.id, t, None),
        };
        self.run.log.push(decision);
        Ok(decision)
    }
}

fn drive<P: OnlinePolicy>(instance: &Instance, mut policy: P) -> Result<P> {
    for job in &instance.jobs {
        policy.offer(job)?;
    }
    Ok(policy)
}

pub fn simulate_nonpreemptive(instance: &Instance) -> Result<NonPreemptiveRun> {
    let alg = OnlineAllocation::new(instance.machines, instance.epsilon);
    Ok(drive(instance, alg)?.finish())
}

pub fn simulate_partitioned(instance: &Instance) -> Result<NonPreemptiveRun> {
    let alg = Partitioned::new(instance.machines, instance.epsilon);
    Ok(drive(instance, alg)?.finish())
}

fn require_single(instance: &Instance) -> Result<()> {
    if instance.machines != 1 {
        return Err(Error::InvalidArgument(format!(
            "the randomized variant needs exactly one machine, got {}",
            instance.machines
        )));
    }
    Ok(())
}

pub fn simulate_randomized_single(instance: &Instance, seed: u64) -> Result<NonPreemptiveRun> {
    require_single(instance)?;
    let alg = RandomizedSingle::with_seed(instance.epsilon, seed);
    Ok(drive(instance, alg)?.finish())
}

/// The randomized variant with the virtual machine fixed to `pick`.
pub fn simulate_randomized_pick(instance: &Instance, pick: usize) -> Result<NonPreemptiveRun> {
    require_single(instance)?;
    let alg = RandomizedSingle::with_pick(instance.epsilon, pick)?;
    Ok(drive(instance, alg)?.finish())
}

pub fn simulate_greedy_nonpreemptive(instance: &Instance) -> Result<NonPreemptiveRun> {
    let alg = GreedyNonPreemptive::new(instance.machines);
    Ok(drive(instance, alg)?.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{utilization, verify_schedule};

    fn inst(m: usize, eps: f64, jobs: &[(f64, f64, f64)]) -> Instance {
        Instance::new(
            eps,
            m,
            jobs.iter()
                .enumerate()
                .map(|(i, &(r, p, d))| Job::new(i, r, p, d))
                .collect(),
        )
    }

    #[test]
    fn d_lim_examples() {
        assert_eq!(d_lim(&[0.0, 0.0], 4.0, 0.5), 4.0);
        assert!((d_lim(&[3.0], 0.0, 1.0) - 6.0).abs() < 1e-12);
        assert!((d_lim(&[2.0, 1.0], 0.0, 1.0) - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn first_job_goes_to_an_empty_machine() {
        let mut alg = OnlineAllocation::new(3, 0.5);
        let d = alg.offer(&Job::new(0, 1.0, 1.0, 2.5)).unwrap();
        assert!(d.accepted);
        assert_eq!(d.start, Some(1.0));
    }

    #[test]
    fn second_identical_job_hits_the_deadline_exactly() {
        let i = inst(1, 1.0, &[(0.0, 1.0, 2.0), (0.0, 1.0, 2.0)]);
        let run = simulate_nonpreemptive(&i).unwrap();
        assert_eq!(run.log.accepted_ids(), vec![0, 1]);
        assert_eq!(run.starts[1].start, 1.0);
        assert_eq!(utilization(&run.log, &i), 2.0);
        assert!(verify_schedule(&run.schedule(1), &run.accepted).is_empty());
    }

    #[test]
    fn threshold_rejects_job_that_fits() {
        let i = inst(1, 1.0, &[(0.0, 1.0, 2.0), (0.0, 0.4, 1.9)]);
        let run = simulate_nonpreemptive(&i).unwrap();
        assert_eq!(run.log.accepted_ids(), vec![0]);
        let g = simulate_greedy_nonpreemptive(&i).unwrap();
        assert_eq!(g.log.accepted_ids(), vec![0, 1]);
    }

    #[test]
    fn loads_decay_with_time() {
        let mut loads = MachineLoads::new(2);
        loads.push(0, 3.0);
        loads.push(1, 1.0);
        loads.advance_to(2.0);
        assert_eq!(loads.by_machine(), vec![1.0, 0.0]);
        assert_eq!(loads.sorted(), vec![1.0, 0.0]);
    }

    #[test]
    fn single_group_partition_matches_plain() {
        // ε = 1/(e−1) gives ln((1+ε)/ε) = 1, so one machine per group
        let eps = 1.0 / (std::f64::consts::E - 1.0);
        assert_eq!(partition_group_size(1, eps), 1);
        let i = inst(1, eps, &[(0.0, 1.0, 3.0), (0.5, 2.0, 6.0), (0.5, 1.0, 2.5)]);
        let a = simulate_nonpreemptive(&i).unwrap();
        let b = simulate_partitioned(&i).unwrap();
        assert_eq!(a.log.accepted_ids(), b.log.accepted_ids());
    }

    #[test]
    fn partition_group_sizes() {
        let eps = 1.0 / (std::f64::consts::E.powi(2) - 1.0);
        assert_eq!(Partitioned::new(4, eps).group_sizes(), vec![2, 2]);
        assert_eq!(Partitioned::new(5, eps).group_sizes(), vec![2, 2, 1]);
        assert_eq!(Partitioned::new(3, 1.0).group_sizes(), vec![1, 1, 1]);
    }

    #[test]
    fn cascade_to_second_group() {
        let eps = 1.0 / (std::f64::consts::E - 1.0);
        let q = growth(eps);
        // group 1 is loaded until its threshold excludes the second job
        let first = Job::new(0, 0.0, 1.0, (1.0 + eps) * 1.0);
        let second = Job::new(1, 0.0, 1.0, q * 1.0 - 0.1);
        let mut p = Partitioned::new(2, eps);
        assert_eq!(p.offer(&first).unwrap().machine, Some(0));
        let d = p.offer(&second).unwrap();
        assert!(d.accepted);
        assert_eq!(d.machine, Some(1));
    }

    #[test]
    fn virtual_machine_choice() {
        assert_eq!(virtual_machines(1.0), 1);
        let eps = 1.0 / (std::f64::consts::E.powi(2) - 1.0);
        assert_eq!(virtual_machines(eps), 2);
    }

    #[test]
    fn randomized_with_one_virtual_machine_is_deterministic() {
        let i = inst(1, 1.0, &[(0.0, 1.0, 2.0), (0.0, 1.0, 2.0), (0.5, 0.5, 2.0)]);
        let a = simulate_nonpreemptive(&i).unwrap();
        for seed in 0..5 {
            let r = simulate_randomized_single(&i, seed).unwrap();
            assert_eq!(r.log.accepted_ids(), a.log.accepted_ids());
        }
        assert!(simulate_randomized_single(&inst(2, 1.0, &[]), 0).is_err());
    }

    #[test]
    fn empty_instance() {
        let run = simulate_nonpreemptive(&inst(2, 0.5, &[])).unwrap();
        assert_eq!(run.accepted_volume(), 0.0);
    }
}
