use commit_sched::harness::{
    mixed_corpus, random_instance, run, write_csv, write_plot_data, Algorithm, ExperimentConfig, RandomSpec,
};
use commit_sched::model::{read_instance, write_instance};

fn config(algorithm: Algorithm) -> ExperimentConfig {
    ExperimentConfig {
        algorithm,
        oracle: true,
        assert_level: 1,
        seed: Some(1),
    }
}

#[test]
fn two_machine_sweep_stays_under_bound() {
    let instances: Vec<_> = (0..500)
        .map(|i| random_instance(1 + i % 10, 2, 1.0, 1000 + i as u64, RandomSpec::default()))
        .collect();
    let report = run(&config(Algorithm::LazyPreemptive), &instances);
    assert!(report.violations.is_empty(), "{:?}", report.violations);
    assert!(report.max_ratio().unwrap() <= 1.65686);
}

#[test]
fn csv_is_deterministic_and_consistent() {
    let instances = mixed_corpus(60, 3);
    let mut a = Vec::new();
    let mut b = Vec::new();
    let report = run(&config(Algorithm::LoadThreshold), &instances);
    write_csv(&report.rows, &mut a).unwrap();
    write_csv(&run(&config(Algorithm::LoadThreshold), &instances).rows, &mut b).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("instance_id,algorithm,m,epsilon,alg_volume,opt_volume,ratio,bound,margin\n"));
    for (i, row) in report.rows.iter().enumerate() {
        assert_eq!(row.instance_id, i);
        let (opt, r) = (row.opt_volume.unwrap(), row.ratio.unwrap());
        if row.alg_volume > 0.0 {
            assert!((r * row.alg_volume - opt).abs() <= 1e-9 * opt.max(1.0));
        }
    }
}

#[test]
fn instance_files_round_trip() {
    let inst = random_instance(7, 3, 0.25, 42, RandomSpec::default());
    let mut buf = Vec::new();
    write_instance(&mut buf, &inst).unwrap();
    let back = read_instance(buf.as_slice()).unwrap();
    assert_eq!(back, inst);
    let mut again = Vec::new();
    write_instance(&mut again, &back).unwrap();
    assert_eq!(buf, again);
}

#[test]
fn plot_files_are_written() {
    let dir = std::env::temp_dir().join(format!("commit-sched-plot-{}", std::process::id()));
    let report = run(&config(Algorithm::LazyPreemptive), &mixed_corpus(30, 8));
    write_plot_data(&dir, 0.5, 8, &report.rows).unwrap();
    let bounds = std::fs::read_to_string(dir.join("bounds_vs_m.dat")).unwrap();
    assert_eq!(bounds.lines().count(), 9);
    let hist = std::fs::read_to_string(dir.join("ratio_hist.dat")).unwrap();
    let counted: usize = hist
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().nth(2).unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(counted, report.rows.len());
    std::fs::remove_dir_all(dir).unwrap();
}
