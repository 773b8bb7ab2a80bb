use std::collections::HashSet;

use commit_sched::harness::{mixed_corpus, run_algorithm, Algorithm};
use commit_sched::oracle::{flow_feasible, max_volume_before, opt_nonpreemptive, opt_preemptive};
use commit_sched::vmin::{horn_feasible, ActiveJob};
use commit_sched::{Instance, Job};
use proptest::prelude::*;

/// Exhaustive unit-slot scheduler: every slot runs any set of at most `m`
/// released, unfinished jobs. Returns the largest total processing of jobs
/// finished by their deadline.
fn slot_opt(jobs: &[Job], m: usize) -> f64 {
    let horizon = jobs.iter().map(|j| j.deadline as usize).max().unwrap_or(0);
    let start: Vec<u8> = jobs.iter().map(|j| j.processing as u8).collect();
    let mut states: HashSet<Vec<u8>> = HashSet::from([start]);
    for slot in 0..horizon {
        let runnable: Vec<usize> = (0..jobs.len())
            .filter(|&i| jobs[i].release as usize <= slot && slot < jobs[i].deadline as usize)
            .collect();
        let mut next = HashSet::new();
        for s in &states {
            let open: Vec<usize> = runnable.iter().copied().filter(|&i| s[i] > 0).collect();
            for mask in 0u32..(1 << open.len()) {
                if mask.count_ones() as usize > m {
                    continue;
                }
                let mut t = s.clone();
                for (b, &i) in open.iter().enumerate() {
                    if mask >> b & 1 == 1 {
                        t[i] -= 1;
                    }
                }
                next.insert(t);
            }
        }
        states = next;
    }
    states
        .iter()
        .map(|s| {
            jobs.iter()
                .zip(s)
                .filter(|(_, &left)| left == 0)
                .map(|(j, _)| j.processing)
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

fn integer_instance() -> impl Strategy<Value = Instance> {
    (1usize..=3, prop::collection::vec((0u32..6, 1u32..4, 0u32..5), 1..=6)).prop_map(|(m, raw)| {
        let jobs = raw
            .into_iter()
            .enumerate()
            .map(|(id, (r, p, extra))| {
                let d = (r + p + extra).min(12).max(r + p);
                Job::new(id, r as f64, p as f64, d as f64)
            })
            .collect();
        Instance::new(0.0, m, jobs)
    })
}

fn common_release() -> impl Strategy<Value = (usize, Vec<Job>)> {
    (1usize..=3, prop::collection::vec((0.1f64..4.0, 0.0f64..6.0), 1..=8)).prop_map(|(m, raw)| {
        let jobs = raw
            .into_iter()
            .enumerate()
            .map(|(id, (p, extra))| Job::new(id, 0.0, p, p + extra))
            .collect();
        (m, jobs)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn flow_matches_horn_on_common_release((m, jobs) in common_release()) {
        let active: Vec<ActiveJob> =
            jobs.iter().map(|j| ActiveJob::new(j.id, j.processing, j.deadline)).collect();
        prop_assert_eq!(flow_feasible(&jobs, m), horn_feasible(&active, 0.0, m));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn preemptive_optimum_matches_slot_search(inst in integer_instance()) {
        let exact = opt_preemptive(&inst).unwrap();
        let slots = slot_opt(&inst.jobs, inst.machines);
        prop_assert!((exact - slots).abs() < 1e-9, "flow {} slots {}", exact, slots);
    }

    #[test]
    fn nonpreemptive_never_beats_preemptive(inst in integer_instance()) {
        let p = opt_preemptive(&inst).unwrap();
        let np = opt_nonpreemptive(&inst).unwrap();
        prop_assert!(np <= p + 1e-9);
    }
}

#[test]
fn three_unit_windows_on_one_machine() {
    let jobs: Vec<Job> = (0..3).map(|i| Job::new(i, 0.0, 1.0, 2.0)).collect();
    let inst = Instance::new(1.0, 1, jobs);
    assert_eq!(opt_nonpreemptive(&inst).unwrap(), 2.0);
    assert_eq!(opt_preemptive(&inst).unwrap(), 2.0);
}

#[test]
fn conflicting_unit_jobs() {
    let jobs: Vec<Job> = (0..2).map(|i| Job::new(i, 0.0, 1.0, 1.0)).collect();
    let inst = Instance::new(0.0, 1, jobs);
    assert_eq!(opt_preemptive(&inst).unwrap(), 1.0);
    assert_eq!(opt_nonpreemptive(&inst).unwrap(), 1.0);
}

#[test]
fn volume_before_clips_windows() {
    let jobs = vec![Job::new(0, 0.0, 2.0, 4.0), Job::new(1, 1.0, 2.0, 3.0)];
    assert!((max_volume_before(&jobs, 1, 2.0) - 2.0).abs() < 1e-9);
    assert!((max_volume_before(&jobs, 2, 2.0) - 3.0).abs() < 1e-9);
}

#[test]
fn oracles_dominate_every_simulator() {
    for inst in mixed_corpus(180, 11) {
        let p = opt_preemptive(&inst).unwrap();
        let np = opt_nonpreemptive(&inst).unwrap();
        assert!(np <= p + 1e-9);
        for alg in Algorithm::ALL {
            if alg == Algorithm::RandomizedSingle && inst.machines != 1 {
                continue;
            }
            let got = run_algorithm(alg, &inst, Some(5), 1).unwrap().accepted_volume();
            let cap = if alg.is_preemptive() { p } else { np };
            assert!(got <= cap + 1e-9, "{alg}: {got} > {cap}");
        }
    }
}
