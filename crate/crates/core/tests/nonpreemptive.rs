use commit_sched::harness::{random_instance, RandomSpec};
use commit_sched::model::verify_schedule;
use commit_sched::nonpreemptive::{
    simulate_greedy_nonpreemptive, simulate_nonpreemptive, simulate_partitioned,
    simulate_randomized_pick, simulate_randomized_single, virtual_machines, RandomizedSingle,
};
use commit_sched::{Instance, Job};
use proptest::prelude::*;

fn arbitrary_instance() -> impl Strategy<Value = Instance> {
    (
        1usize..=4,
        prop::sample::select(vec![0.1, 0.25, 0.5, 1.0]),
        prop::collection::vec((0.0f64..8.0, 0.2f64..5.0, 1.0f64..3.0), 0..=12),
    )
        .prop_map(|(m, eps, raw)| {
            let mut raw = raw;
            raw.sort_by(|a, b| a.0.total_cmp(&b.0));
            let jobs = raw
                .into_iter()
                .enumerate()
                .map(|(id, (r, p, s))| Job::new(id, r, p, r + (1.0 + eps) * p * s))
                .collect();
            Instance::new(eps, m, jobs)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn committed_starts_meet_deadlines(inst in arbitrary_instance()) {
        let m = inst.machines;
        for run in [
            simulate_nonpreemptive(&inst).unwrap(),
            simulate_partitioned(&inst).unwrap(),
            simulate_greedy_nonpreemptive(&inst).unwrap(),
        ] {
            prop_assert!(verify_schedule(&run.schedule(m), &run.accepted).is_empty());
            prop_assert_eq!(run.starts.len(), run.accepted.len());
            for s in &run.starts {
                let job = inst.job(s.job).unwrap();
                prop_assert!(s.start + 1e-9 >= job.release);
                prop_assert!(s.start + job.processing <= job.deadline + 1e-9);
            }
        }
    }

    #[test]
    fn randomized_run_fits_one_machine(inst in arbitrary_instance(), seed in any::<u64>()) {
        let inst = Instance::new(inst.epsilon, 1, inst.jobs);
        let run = simulate_randomized_single(&inst, seed).unwrap();
        prop_assert!(verify_schedule(&run.schedule(1), &run.accepted).is_empty());
    }
}

/// Averaging the kept virtual machine over every pick recovers the virtual
/// schedule's utilization divided by the number of virtual machines.
#[test]
fn randomized_expectation_is_exact() {
    let eps = 1.0 / (std::f64::consts::E.powi(2) - 1.0);
    let k = virtual_machines(eps);
    assert_eq!(k, 2);
    for seed in 0..100 {
        let inst = random_instance(8, 1, eps, seed, RandomSpec::default());
        let total: f64 = (0..k)
            .map(|pick| simulate_randomized_pick(&inst, pick).unwrap().accepted_volume())
            .sum();
        let mut virt = RandomizedSingle::with_pick(eps, 0).unwrap();
        for job in &inst.jobs {
            commit_sched::OnlinePolicy::offer(&mut virt, job).unwrap();
        }
        let v = virt.virtual_run().accepted_volume();
        assert!((total / k as f64 - v / k as f64).abs() < 1e-12, "seed {seed}");
    }
}

#[test]
fn seeds_are_reproducible() {
    let inst = random_instance(10, 1, 0.5, 4, RandomSpec::default());
    let a = simulate_randomized_single(&inst, 9).unwrap();
    let b = simulate_randomized_single(&inst, 9).unwrap();
    assert_eq!(a.log, b.log);
}
