//! Experiment runner: algorithm selection, random instances, oracle
//! comparison, bound tables and CSV / plot-data output.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::adversary::{solve_c_lower, strengthened_preemptive_bound, NonPreemptiveAdversary, PreemptiveAdversary};
use crate::error::{Error, Result};
use crate::model::{verify_schedule, Decision, DecisionLog, Instance, Job, Schedule};
use crate::nonpreemptive::{
    partition_group_size, virtual_machines, GreedyNonPreemptive, OnlineAllocation, Partitioned,
    RandomizedSingle,
};
use crate::online::{replay, OnlinePolicy};
use crate::oracle::{opt_nonpreemptive, opt_preemptive, NONPREEMPTIVE_LIMIT, PREEMPTIVE_LIMIT};
use crate::preemptive::{AssertLevel, Greedy, LazyAcceptance, PreemptiveSimulator};
use crate::vmin::growth;

/// Slack on bound comparisons.
pub const BOUND_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Lazy acceptance with plan-based preemptive scheduling.
    LazyPreemptive,
    /// Load-threshold non-preemptive allocation.
    LoadThreshold,
    /// Load-threshold allocation on cascaded machine groups.
    Partitioned,
    /// Load-threshold allocation on virtual machines, one kept at random.
    RandomizedSingle,
    GreedyPreemptive,
    GreedyNonPreemptive,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::LazyPreemptive,
        Algorithm::LoadThreshold,
        Algorithm::Partitioned,
        Algorithm::RandomizedSingle,
        Algorithm::GreedyPreemptive,
        Algorithm::GreedyNonPreemptive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::LazyPreemptive => "alg1+2",
            Algorithm::LoadThreshold => "alg3",
            Algorithm::Partitioned => "alg3-partitioned",
            Algorithm::RandomizedSingle => "alg3-randomized",
            Algorithm::GreedyPreemptive => "greedy-p",
            Algorithm::GreedyNonPreemptive => "greedy-np",
        }
    }

    pub fn is_preemptive(self) -> bool {
        matches!(self, Algorithm::LazyPreemptive | Algorithm::GreedyPreemptive)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                Error::InvalidArgument(format!("unknown algorithm {s:?}, expected one of {}", names.join(", ")))
            })
    }
}

/// Closed-form competitive bounds for one `(m, ε)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundTable {
    pub machines: usize,
    pub epsilon: f64,
    /// `m(1+ε)(((1+ε)/ε)^{1/m} − 1)`.
    pub preemptive_upper: f64,
    /// `⌊m(1+ε)⌋(((1+ε)/ε)^{1/m} − 1)`.
    pub preemptive_lower: f64,
    /// The strengthened numerator times `((1+ε)/ε)^{1/m} − 1`.
    pub preemptive_lower_strengthened: f64,
    /// `(1+ε)·ln((1+ε)/ε)`, the limit of the preemptive upper bound in `m`.
    pub preemptive_asymptote: f64,
    /// `m((1+ε)/ε)^{1/m} + 1`.
    pub nonpreemptive_upper: f64,
    /// `e·ln((1+ε)/ε) + 1` when `ln((1+ε)/ε)` is an integer dividing `m`.
    pub partitioned_upper: Option<f64>,
    /// The root `c` of the non-preemptive lower-bound equation.
    pub nonpreemptive_lower: Option<f64>,
    /// `min m'²((1+ε)/ε)^{1/m'} + m'` over the two integers around `ln((1+ε)/ε)`.
    pub randomized_single: f64,
}

fn ln_growth_integral(epsilon: f64) -> Option<usize> {
    let l = growth(epsilon).ln();
    ((l - l.round()).abs() < 1e-9 && l.round() >= 1.0).then(|| l.round() as usize)
}

pub fn theoretical_bounds(machines: usize, epsilon: f64) -> BoundTable {
    let m = machines as f64;
    let q = growth(epsilon);
    let root = (q.ln() / m).exp_m1();
    let floor = (m * (1.0 + epsilon) + 1e-9).floor();
    let partitioned_upper = ln_growth_integral(epsilon)
        .filter(|&g| machines.is_multiple_of(g))
        .map(|g| std::f64::consts::E * g as f64 + 1.0);
    let vm = virtual_machines(epsilon) as f64;
    BoundTable {
        machines,
        epsilon,
        preemptive_upper: m * (1.0 + epsilon) * root,
        preemptive_lower: floor * root,
        preemptive_lower_strengthened: strengthened_preemptive_bound(machines, epsilon) * root,
        preemptive_asymptote: (1.0 + epsilon) * q.ln(),
        nonpreemptive_upper: m * q.powf(1.0 / m) + 1.0,
        partitioned_upper,
        nonpreemptive_lower: solve_c_lower(machines, epsilon).ok(),
        randomized_single: vm * vm * q.powf(1.0 / vm) + vm,
    }
}

/// The bound a row is compared against, and whether a violation counts.
pub fn applicable_bound(alg: Algorithm, machines: usize, epsilon: f64) -> Option<(f64, bool)> {
    if epsilon > 1.0 {
        return None;
    }
    let b = theoretical_bounds(machines, epsilon);
    match alg {
        Algorithm::LazyPreemptive => Some((b.preemptive_upper, true)),
        Algorithm::LoadThreshold => Some((b.nonpreemptive_upper, true)),
        Algorithm::Partitioned => match b.partitioned_upper {
            Some(p) => Some((p, true)),
            None => ln_growth_integral(epsilon).map(|_| {
                let g = partition_group_size(machines, epsilon);
                let rest = machines % g;
                let r = if rest == 0 { g } else { rest } as f64;
                (r * growth(epsilon).powf(1.0 / r) + 1.0, false)
            }),
        },
        // an expectation bound says nothing about a single seed
        Algorithm::RandomizedSingle => Some((b.randomized_single, false)),
        Algorithm::GreedyPreemptive | Algorithm::GreedyNonPreemptive => None,
    }
}

/// `opt / alg`, with `0/0 = 1` and `x/0 = ∞`.
pub fn ratio(opt: f64, alg: f64) -> f64 {
    if opt <= 0.0 && alg <= 0.0 {
        1.0
    } else if alg <= 0.0 {
        f64::INFINITY
    } else {
        opt / alg
    }
}

/// Parameters of the random instance generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSpec {
    pub release_span: f64,
    /// Probability that a job has exactly the minimum slack.
    pub slack_mix: f64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            release_span: 10.0,
            slack_mix: 0.5,
        }
    }
}

/// `n` jobs with releases uniform on `[0, span]`, processing log-uniform on
/// `[1, 8]` and windows `(1+ε)·p·s` where `s = 1` with probability
/// `slack_mix`, otherwise uniform on `[1, 3]`.
pub fn random_instance(n: usize, machines: usize, epsilon: f64, seed: u64, spec: RandomSpec) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut releases: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=spec.release_span)).collect();
    releases.sort_by(f64::total_cmp);
    let jobs = releases
        .into_iter()
        .enumerate()
        .map(|(id, r)| {
            let p = rng.gen_range(0.0..=8f64.ln()).exp();
            let stretch = if rng.gen::<f64>() < spec.slack_mix {
                1.0
            } else {
                rng.gen_range(1.0..=3.0)
            };
            Job::new(id, r, p, r + (1.0 + epsilon) * p * stretch)
        })
        .collect();
    Instance::new(epsilon, machines, jobs)
}

pub const CORPUS_MACHINES: [usize; 3] = [1, 2, 3];
pub const CORPUS_EPSILONS: [f64; 3] = [0.1, 0.5, 1.0];
pub const CORPUS_MAX_JOBS: usize = 12;

/// Mixed sweep cycling through every `(m, ε)` of the corpus grid and
/// `n = 1..=12`; instance `i` is drawn with seed `seed + i`.
pub fn mixed_corpus(count: usize, seed: u64) -> Vec<Instance> {
    (0..count)
        .map(|i| {
            let m = CORPUS_MACHINES[i % 3];
            let eps = CORPUS_EPSILONS[(i / 3) % 3];
            let n = 1 + (i / 9) % CORPUS_MAX_JOBS;
            random_instance(n, m, eps, seed.wrapping_add(i as u64), RandomSpec::default())
        })
        .collect()
}

/// What an algorithm did on one instance.
#[derive(Debug, Clone)]
pub struct AlgorithmRun {
    pub log: DecisionLog,
    pub schedule: Schedule,
    pub accepted: Vec<Job>,
    pub trace: Vec<String>,
}

impl AlgorithmRun {
    pub fn accepted_volume(&self) -> f64 {
        self.accepted.iter().map(|j| j.processing).sum()
    }
}

/// Any of the algorithms behind one online interface.
pub enum Runner {
    Lazy(PreemptiveSimulator<LazyAcceptance>),
    GreedyP(PreemptiveSimulator<Greedy>),
    Threshold(OnlineAllocation),
    Partitioned(Partitioned),
    Randomized(RandomizedSingle),
    GreedyNp(GreedyNonPreemptive),
}

impl Runner {
    pub fn new(
        alg: Algorithm,
        machines: usize,
        epsilon: f64,
        seed: Option<u64>,
        assert_level: AssertLevel,
    ) -> Result<Self> {
        Ok(match alg {
            Algorithm::LazyPreemptive => Runner::Lazy(PreemptiveSimulator::new(
                LazyAcceptance::new(machines, epsilon),
                machines,
                assert_level,
            )),
            Algorithm::GreedyPreemptive => {
                Runner::GreedyP(PreemptiveSimulator::new(Greedy, machines, assert_level))
            }
            Algorithm::LoadThreshold => {
                let a = OnlineAllocation::new(machines, epsilon);
                Runner::Threshold(if assert_level == 0 { a.unchecked() } else { a })
            }
            Algorithm::Partitioned => Runner::Partitioned(Partitioned::new(machines, epsilon)),
            Algorithm::RandomizedSingle => {
                if machines != 1 {
                    return Err(Error::InvalidArgument(format!(
                        "{} runs on one machine, got m = {machines}",
                        alg.name()
                    )));
                }
                let seed = seed.ok_or_else(|| {
                    Error::InvalidArgument(format!("{} needs a seed", alg.name()))
                })?;
                Runner::Randomized(RandomizedSingle::with_seed(epsilon, seed))
            }
            Algorithm::GreedyNonPreemptive => Runner::GreedyNp(GreedyNonPreemptive::new(machines)),
        })
    }

    pub fn finish(self, machines: usize) -> Result<AlgorithmRun> {
        let np = |run: crate::nonpreemptive::NonPreemptiveRun, machines: usize| AlgorithmRun {
            schedule: run.schedule(machines),
            log: run.log,
            accepted: run.accepted,
            trace: run.trace,
        };
        Ok(match self {
            Runner::Lazy(sim) => {
                let r = sim.finish()?;
                AlgorithmRun {
                    log: r.log,
                    schedule: r.schedule,
                    accepted: r.accepted,
                    trace: r.trace,
                }
            }
            Runner::GreedyP(sim) => {
                let r = sim.finish()?;
                AlgorithmRun {
                    log: r.log,
                    schedule: r.schedule,
                    accepted: r.accepted,
                    trace: r.trace,
                }
            }
            Runner::Threshold(a) => np(a.finish(), machines),
            Runner::Partitioned(a) => np(a.finish(), machines),
            Runner::Randomized(a) => np(a.finish(), 1),
            Runner::GreedyNp(a) => np(a.finish(), machines),
        })
    }
}

impl OnlinePolicy for Runner {
    fn offer(&mut self, job: &Job) -> Result<Decision> {
        match self {
            Runner::Lazy(s) => s.offer(job),
            Runner::GreedyP(s) => s.offer(job),
            Runner::Threshold(a) => a.offer(job),
            Runner::Partitioned(a) => a.offer(job),
            Runner::Randomized(a) => a.offer(job),
            Runner::GreedyNp(a) => a.offer(job),
        }
    }
}

/// Runs `alg` over `instance` in submission order.
pub fn run_algorithm(
    alg: Algorithm,
    instance: &Instance,
    seed: Option<u64>,
    assert_level: AssertLevel,
) -> Result<AlgorithmRun> {
    let mut runner = Runner::new(alg, instance.machines, instance.epsilon, seed, assert_level)?;
    for job in &instance.jobs {
        runner.offer(job)?;
    }
    runner.finish(instance.machines)
}

/// Exact optimum for the algorithm's machine environment, if the instance is
/// small enough.
pub fn oracle_opt(alg: Algorithm, instance: &Instance) -> Option<f64> {
    let n = instance.jobs.len();
    if alg.is_preemptive() {
        (n <= PREEMPTIVE_LIMIT).then(|| opt_preemptive(instance).ok()).flatten()
    } else {
        (n <= NONPREEMPTIVE_LIMIT).then(|| opt_nonpreemptive(instance).ok()).flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversaryKind {
    Preemptive,
    NonPreemptive,
}

impl FromStr for AdversaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "preemptive" | "theorem3" => Ok(AdversaryKind::Preemptive),
            "nonpreemptive" | "theorem5" => Ok(AdversaryKind::NonPreemptive),
            _ => Err(Error::InvalidArgument(format!(
                "unknown adversary {s:?}, expected preemptive (theorem3) or nonpreemptive (theorem5)"
            ))),
        }
    }
}

/// Result of replaying an adversary against one algorithm.
#[derive(Debug, Clone)]
pub struct AdversaryOutcome {
    /// The realized job sequence, replayable as an ordinary instance.
    pub instance: Instance,
    pub decisions: Vec<Decision>,
    pub alg_volume: f64,
    pub opt_volume: f64,
    pub ratio: f64,
    /// The lower bound the construction is designed to force.
    pub lower_bound: f64,
    pub run: AlgorithmRun,
}

pub fn run_adversary(
    kind: AdversaryKind,
    alg: Algorithm,
    machines: usize,
    epsilon: f64,
    delta: f64,
    seed: Option<u64>,
    assert_level: AssertLevel,
) -> Result<AdversaryOutcome> {
    let mut runner = Runner::new(alg, machines, epsilon, seed, assert_level)?;
    let (jobs, decisions, opt, lower) = match kind {
        AdversaryKind::Preemptive => {
            let mut adv = PreemptiveAdversary::new(machines, epsilon, delta)?;
            let (jobs, decisions) = replay(&mut adv, &mut runner)?;
            let opt = adv.constructive_opt();
            check_constructive(&opt)?;
            (jobs, decisions, opt.volume, theoretical_bounds(machines, epsilon).preemptive_lower)
        }
        AdversaryKind::NonPreemptive => {
            let mut adv = NonPreemptiveAdversary::new(machines, epsilon, delta)?;
            let (jobs, decisions) = replay(&mut adv, &mut runner)?;
            let opt = adv.constructive_opt();
            check_constructive(&opt)?;
            (jobs, decisions, opt.volume, adv.c())
        }
    };
    let run = runner.finish(machines)?;
    let alg_volume = run.accepted_volume();
    Ok(AdversaryOutcome {
        instance: Instance::new(epsilon, machines, jobs),
        decisions,
        alg_volume,
        opt_volume: opt,
        ratio: ratio(opt, alg_volume),
        lower_bound: lower,
        run,
    })
}

fn check_constructive(opt: &crate::adversary::ConstructiveOpt) -> Result<()> {
    let v = opt.verify();
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::invariant(
            0.0,
            format!("constructive optimum is not a valid schedule: {}", v[0]),
        ))
    }
}

/// One CSV row. Volumes of 0/0 give ratio 1; a positive optimum against
/// nothing accepted gives `inf`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRow {
    pub instance_id: usize,
    pub algorithm: String,
    pub m: usize,
    pub epsilon: f64,
    pub alg_volume: f64,
    pub opt_volume: Option<f64>,
    pub ratio: Option<f64>,
    pub bound: Option<f64>,
    pub margin: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub oracle: bool,
    pub assert_level: AssertLevel,
    /// Seed for the randomized algorithm; instance `i` uses `seed + i`.
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    /// Rejects configurations the algorithm cannot run with, before any
    /// instance is evaluated.
    pub fn check(&self, machines: usize, epsilon: f64) -> Result<()> {
        Runner::new(self.algorithm, machines, epsilon, self.seed, self.assert_level).map(|_| ())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub rows: Vec<RatioRow>,
    /// Commitment breaches, invariant failures and enforced-bound violations.
    pub violations: Vec<String>,
    /// Event traces of runs aborted by an invariant breach, by instance id.
    pub traces: Vec<(usize, Vec<String>)>,
}

impl Report {
    pub fn max_ratio(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.ratio).reduce(f64::max)
    }
}

type Evaluation = (RatioRow, Vec<String>, Option<Vec<String>>);

fn evaluate(config: &ExperimentConfig, id: usize, instance: &Instance) -> Evaluation {
    let alg = config.algorithm;
    let mut problems = Vec::new();
    let mut trace = None;
    let seed = config.seed.map(|s| s.wrapping_add(id as u64));
    let (alg_volume, run_ok) = match run_algorithm(alg, instance, seed, config.assert_level) {
        Ok(run) => {
            let v = verify_schedule(&run.schedule, &run.accepted);
            if let Some(first) = v.first() {
                problems.push(format!("instance {id}: {first}"));
            }
            (run.accepted_volume(), true)
        }
        Err(e) => {
            problems.push(format!("instance {id}: {e}"));
            if let Error::Invariant { trace: lines, .. } = e {
                trace = Some(lines);
            }
            (0.0, false)
        }
    };
    let opt_volume = if config.oracle && run_ok {
        oracle_opt(alg, instance)
    } else {
        None
    };
    let r = opt_volume.map(|o| ratio(o, alg_volume));
    let bound = applicable_bound(alg, instance.machines, instance.epsilon);
    let margin = match (r, bound) {
        (Some(r), Some((b, _))) => Some(b - r),
        _ => None,
    };
    if let (Some(r), Some((b, true))) = (r, bound) {
        if r > b + BOUND_SLACK {
            problems.push(format!("instance {id}: ratio {r} exceeds bound {b}"));
        }
    }
    let row = RatioRow {
        instance_id: id,
        algorithm: alg.name().to_string(),
        m: instance.machines,
        epsilon: instance.epsilon,
        alg_volume,
        opt_volume,
        ratio: r,
        bound: bound.map(|(b, _)| b),
        margin,
    };
    (row, problems, trace)
}

/// Evaluates `config` on every instance, in parallel; rows come back in
/// instance order.
pub fn run(config: &ExperimentConfig, instances: &[Instance]) -> Report {
    let results: Vec<Evaluation> = instances
        .par_iter()
        .enumerate()
        .map(|(id, inst)| evaluate(config, id, inst))
        .collect();
    let mut report = Report::default();
    for (row, problems, trace) in results {
        if let Some(t) = trace {
            report.traces.push((row.instance_id, t));
        }
        report.rows.push(row);
        report.violations.extend(problems);
    }
    report
}

pub fn write_csv<W: Write>(rows: &[RatioRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `bounds_vs_m.dat` (bound curves for `m = 1..=max_m`) and
/// `ratio_hist.dat` (histogram of the finite ratios in `rows`) into `dir`.
pub fn write_plot_data(dir: &Path, epsilon: f64, max_m: usize, rows: &[RatioRow]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut f = std::fs::File::create(dir.join("bounds_vs_m.dat"))?;
    writeln!(
        f,
        "# m preemptive_upper preemptive_lower preemptive_asymptote nonpreemptive_upper nonpreemptive_lower  (epsilon = {epsilon})"
    )?;
    for m in 1..=max_m {
        let b = theoretical_bounds(m, epsilon);
        writeln!(
            f,
            "{m} {:.9} {:.9} {:.9} {:.9} {}",
            b.preemptive_upper,
            b.preemptive_lower,
            b.preemptive_asymptote,
            b.nonpreemptive_upper,
            b.nonpreemptive_lower.map_or("nan".to_string(), |c| format!("{c:.9}"))
        )?;
    }

    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).filter(|r| r.is_finite()).collect();
    let mut h = std::fs::File::create(dir.join("ratio_hist.dat"))?;
    writeln!(h, "# bin_low bin_high count")?;
    if let Some(hi) = ratios.iter().copied().reduce(f64::max) {
        let bins = 20;
        let lo = 1.0;
        let width = ((hi - lo) / bins as f64).max(1e-9);
        let mut counts = vec![0usize; bins];
        for r in &ratios {
            let k = (((r - lo) / width).floor().max(0.0) as usize).min(bins - 1);
            counts[k] += 1;
        }
        for (k, c) in counts.iter().enumerate() {
            let a = lo + k as f64 * width;
            writeln!(h, "{a:.9} {:.9} {c}", a + width)?;
        }
    }
    Ok(())
}
