use std::path::PathBuf;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_commit-sched"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("commit-sched-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn bounds_prints_table() {
    let out = bin(&["bounds", "--m", "2", "--epsilon", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("preemptive upper              1.656854249"));
    assert!(text.contains("non-preemptive upper          3.828427125"));
}

#[test]
fn gen_then_verify() {
    let dir = scratch("verify");
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("inst.jsonl");
    let f = file.to_str().unwrap();
    assert!(bin(&["gen", "--m", "2", "--epsilon", "0.5", "--n", "7", "--seed", "4", "--out", f]).status.success());
    for alg in ["alg1+2", "alg3", "alg3-partitioned", "greedy-p", "greedy-np"] {
        let out = bin(&["verify", f, "--alg", alg, "--oracle"]);
        assert!(out.status.success(), "{alg}: {}", String::from_utf8_lossy(&out.stderr));
    }
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn run_writes_csv_and_plot_data() {
    let dir = scratch("run");
    let d = dir.to_str().unwrap();
    let out = bin(&["run", "--alg", "alg1+2", "--m", "2", "--epsilon", "1", "--count", "20", "--oracle", "--out", d]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("ratios.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
    assert!(dir.join("bounds_vs_m.dat").exists());
    assert!(dir.join("ratio_hist.dat").exists());
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn adversary_reports_ratio() {
    let out = bin(&["adversary", "--kind", "nonpreemptive", "--alg", "alg3", "--m", "2", "--epsilon", "1"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("ratio 2.000000"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(bin(&["run", "--alg", "nope"]).status.code(), Some(2));
    assert_eq!(bin(&["run", "--alg", "alg3-randomized", "--m", "2"]).status.code(), Some(2));
    assert_eq!(bin(&["verify", "/nonexistent/instance.jsonl", "--alg", "alg3"]).status.code(), Some(2));
}

#[test]
fn infeasible_file_is_rejected() {
    let dir = scratch("bad");
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("bad.jsonl");
    std::fs::write(&file, "{\"epsilon\":1.0,\"machines\":1}\n{\"id\":0,\"r\":0.0,\"p\":1.0,\"d\":1.5}\n").unwrap();
    let out = bin(&["verify", file.to_str().unwrap(), "--alg", "alg3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("slack"));
    std::fs::remove_dir_all(dir).unwrap();
}
