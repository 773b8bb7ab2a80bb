use commit_sched::harness::{random_instance, RandomSpec};
use commit_sched::model::{utilization, verify_schedule};
use commit_sched::oracle::max_volume_before;
use commit_sched::preemptive::{simulate_accept_all, simulate_greedy_preemptive, simulate_preemptive};
use commit_sched::vmin::{horn_feasible, ActiveJob};
use commit_sched::{Instance, Job};
use proptest::prelude::*;

fn arbitrary_instance() -> impl Strategy<Value = Instance> {
    (
        1usize..=3,
        prop::sample::select(vec![0.1, 0.25, 0.5, 1.0]),
        prop::collection::vec((0.0f64..8.0, 0.2f64..5.0, 1.0f64..3.0), 0..=10),
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
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn accepted_jobs_finish_with_full_checks(inst in arbitrary_instance()) {
        let run = simulate_preemptive(&inst, 2).unwrap();
        prop_assert!(verify_schedule(&run.schedule, &run.accepted).is_empty());
        prop_assert!(run.log.covers(&inst));
        let greedy = simulate_greedy_preemptive(&inst, 1).unwrap();
        prop_assert!(verify_schedule(&greedy.schedule, &greedy.accepted).is_empty());
    }

    #[test]
    fn schedule_volume_equals_utilization(inst in arbitrary_instance()) {
        let run = simulate_preemptive(&inst, 1).unwrap();
        let u = utilization(&run.log, &inst);
        prop_assert!((run.schedule.volume() - u).abs() < 1e-7 * (1.0 + u));
    }
}

/// Accept-all plan execution on a common-release feasible set never falls
/// more than a quarter behind the most volume any schedule can finish by `t`.
#[test]
fn plans_track_the_best_prefix_volume() {
    let mut checked = 0;
    let mut seed = 0u64;
    while checked < 200 {
        seed += 1;
        let m = 1 + (seed % 3) as usize;
        let eps = [0.1, 0.5, 1.0][(seed / 3 % 3) as usize];
        let mut inst = random_instance(1 + (seed % 8) as usize, m, eps, seed, RandomSpec::default());
        for j in &mut inst.jobs {
            j.deadline -= j.release;
            j.release = 0.0;
        }
        let active: Vec<ActiveJob> =
            inst.jobs.iter().map(|j| ActiveJob::new(j.id, j.processing, j.deadline)).collect();
        if !horn_feasible(&active, 0.0, m) {
            continue;
        }
        checked += 1;
        let run = simulate_accept_all(&inst, 2).unwrap();
        assert!(verify_schedule(&run.schedule, &run.accepted).is_empty());
        for &t in &run.events {
            let best = max_volume_before(&inst.jobs, m, t);
            let done = run.schedule.volume_before(t);
            assert!(best - done <= 0.25 * best + 1e-9, "seed {seed} t={t}: {done} vs {best}");
        }
    }
}

#[test]
fn lazy_threshold_rejects_a_short_early_job() {
    let inst = Instance::new(1.0, 1, vec![Job::new(0, 0.0, 1.0, 2.0), Job::new(1, 0.0, 0.4, 1.3)]);
    let lazy = simulate_preemptive(&inst, 2).unwrap();
    let greedy = simulate_greedy_preemptive(&inst, 2).unwrap();
    assert_eq!(lazy.log.accepted_ids(), vec![0]);
    assert_eq!(greedy.log.accepted_ids(), vec![0, 1]);
    assert!(lazy.trace.iter().any(|l| l.contains("reject job=1")));
}

