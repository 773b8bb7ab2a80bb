use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use commit_sched::harness::{
    random_instance, run, run_adversary, run_algorithm, theoretical_bounds, write_csv, write_plot_data,
    AdversaryKind, Algorithm, ExperimentConfig, RandomSpec,
};
use commit_sched::model::{read_instance, verify_schedule, write_instance};
use commit_sched::{Error, Instance};

#[derive(Parser)]
#[command(name = "commit-sched", version, about = "Online scheduling with commitment: simulators, oracles, adversaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an algorithm over random instances or an instance file and write ratio CSV and plot data.
    Run(RunArgs),
    /// Print the closed-form bounds for one (m, epsilon).
    Bounds(BoundsArgs),
    /// Generate a random instance in the JSON-lines format.
    Gen(GenArgs),
    /// Replay an adaptive lower-bound adversary against an algorithm.
    Adversary(AdversaryArgs),
    /// Run an algorithm on an instance file and check every commitment.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RandomArgs {
    /// Jobs per generated instance.
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 10.0)]
    release_span: f64,
    /// Probability that a generated job has exactly the minimum slack.
    #[arg(long, default_value_t = 0.5)]
    slack_mix: f64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    alg: Algorithm,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[command(flatten)]
    random: RandomArgs,
    /// Number of random instances.
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Base seed; instance i is generated with seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Read one instance from this file instead of generating.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Compute exact optima for ratio columns.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = 1)]
    assert_level: u8,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Also write bounds_vs_m.dat for m = 1..=max-m into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    max_m: usize,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[command(flatten)]
    random: RandomArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AdversaryArgs {
    /// preemptive (alias theorem3) or nonpreemptive (alias theorem5).
    #[arg(long, default_value = "preemptive")]
    kind: AdversaryKind,
    #[arg(long)]
    alg: Algorithm,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = commit_sched::adversary::DEFAULT_DELTA)]
    delta: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    assert_level: u8,
    /// Write the realized instance and the event trace into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    instance: PathBuf,
    #[arg(long)]
    alg: Algorithm,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 2)]
    assert_level: u8,
    /// Compare against the exact optimum.
    #[arg(long)]
    oracle: bool,
}

/// Invariant or bound violation.
const EXIT_VIOLATION: u8 = 1;
/// Bad arguments or unreadable input.
const EXIT_USAGE: u8 = 2;

enum Failure {
    Violation(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Invariant { .. } | Error::ClockRegression { .. } => Failure::Violation(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Adversary(a) => cmd_adversary(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation(msg)) => {
            eprintln!("violation: {msg}");
            ExitCode::from(EXIT_VIOLATION)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn load(path: &Path) -> Result<Instance, Failure> {
    let f = File::open(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    read_instance(BufReader::new(f)).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn spec(r: &RandomArgs) -> RandomSpec {
    RandomSpec {
        release_span: r.release_span,
        slack_mix: r.slack_mix,
    }
}

fn write_trace(path: &Path, lines: &[String]) -> std::io::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    for l in lines {
        writeln!(f, "{l}")?;
    }
    f.flush()
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let instances = match &a.instance {
        Some(path) => vec![load(path)?],
        None => (0..a.count)
            .map(|i| random_instance(a.random.n, a.m, a.epsilon, a.seed.wrapping_add(i as u64), spec(&a.random)))
            .collect(),
    };
    let config = ExperimentConfig {
        algorithm: a.alg,
        oracle: a.oracle,
        assert_level: a.assert_level,
        seed: Some(a.seed),
    };
    for inst in &instances {
        config.check(inst.machines, inst.epsilon)?;
    }
    let report = run(&config, &instances);
    std::fs::create_dir_all(&a.out)?;
    let csv_path = a.out.join("ratios.csv");
    write_csv(&report.rows, BufWriter::new(File::create(&csv_path)?))?;
    let eps = instances.first().map_or(a.epsilon, |i| i.epsilon);
    let max_m = instances.iter().map(|i| i.machines).max().unwrap_or(a.m).max(32);
    write_plot_data(&a.out, eps, max_m, &report.rows)?;
    println!("wrote {} rows to {}", report.rows.len(), csv_path.display());
    if let Some(r) = report.max_ratio() {
        println!("max ratio {r:.6}");
    }
    for (id, trace) in &report.traces {
        let p = a.out.join(format!("trace_{id}.txt"));
        write_trace(&p, trace)?;
        eprintln!("instance {id}: trace written to {}", p.display());
    }
    if report.violations.is_empty() {
        Ok(())
    } else {
        for v in &report.violations {
            eprintln!("{v}");
        }
        Err(Failure::Violation(format!("{} violations", report.violations.len())))
    }
}

fn cmd_bounds(a: BoundsArgs) -> Result<(), Failure> {
    if a.m == 0 || a.epsilon <= 0.0 {
        return Err(Failure::Usage("need m >= 1 and epsilon > 0".into()));
    }
    let b = theoretical_bounds(a.m, a.epsilon);
    let opt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.9}"));
    println!("m = {}, epsilon = {}", b.machines, b.epsilon);
    println!("preemptive upper              {:.9}", b.preemptive_upper);
    println!("preemptive lower              {:.9}", b.preemptive_lower);
    println!("preemptive lower strengthened {:.9}", b.preemptive_lower_strengthened);
    println!("preemptive asymptote          {:.9}", b.preemptive_asymptote);
    println!("non-preemptive upper          {:.9}", b.nonpreemptive_upper);
    println!("non-preemptive lower          {}", opt(b.nonpreemptive_lower));
    println!("partitioned upper             {}", opt(b.partitioned_upper));
    println!("randomized single machine     {:.9}", b.randomized_single);
    if let Some(dir) = a.out {
        write_plot_data(&dir, a.epsilon, a.max_m, &[])?;
        println!("wrote {}", dir.join("bounds_vs_m.dat").display());
    }
    Ok(())
}

fn cmd_gen(a: GenArgs) -> Result<(), Failure> {
    let inst = random_instance(a.random.n, a.m, a.epsilon, a.seed, spec(&a.random));
    match a.out {
        Some(path) => write_instance(BufWriter::new(File::create(path)?), &inst)?,
        None => write_instance(std::io::stdout().lock(), &inst)?,
    }
    Ok(())
}

fn cmd_adversary(a: AdversaryArgs) -> Result<(), Failure> {
    let outcome = run_adversary(a.kind, a.alg, a.m, a.epsilon, a.delta, a.seed, a.assert_level);
    let o = match outcome {
        Ok(o) => o,
        Err(e) => {
            if let (Some(dir), Error::Invariant { trace, .. }) = (&a.out, &e) {
                std::fs::create_dir_all(dir)?;
                write_trace(&dir.join("trace.txt"), trace)?;
                eprintln!("trace written to {}", dir.join("trace.txt").display());
            }
            return Err(e.into());
        }
    };
    let accepted = o.decisions.iter().filter(|d| d.accepted).count();
    println!(
        "{} jobs, {accepted} accepted; alg volume {:.6}, constructive opt {:.6}",
        o.instance.jobs.len(),
        o.alg_volume,
        o.opt_volume
    );
    println!("ratio {:.6}, target lower bound {:.6}", o.ratio, o.lower_bound);
    if let Some(dir) = a.out {
        std::fs::create_dir_all(&dir)?;
        write_instance(BufWriter::new(File::create(dir.join("instance.jsonl"))?), &o.instance)?;
        write_trace(&dir.join("trace.txt"), &o.run.trace)?;
        println!("wrote {}", dir.display());
    }
    let v = verify_schedule(&o.run.schedule, &o.run.accepted);
    match v.first() {
        None => Ok(()),
        Some(first) => Err(Failure::Violation(first.to_string())),
    }
}

fn cmd_verify(a: VerifyArgs) -> Result<(), Failure> {
    let inst = load(&a.instance)?;
    let run = run_algorithm(a.alg, &inst, a.seed, a.assert_level)?;
    for d in &run.log.decisions {
        let place = match (d.machine, d.start) {
            (Some(m), Some(s)) => format!(" machine={m} start={s:.6}"),
            _ => String::new(),
        };
        println!(
            "job {} t={:.6} {}{place}",
            d.job,
            d.time,
            if d.accepted { "accept" } else { "reject" }
        );
    }
    println!("accepted volume {:.6}", run.accepted_volume());
    if a.oracle {
        if let Some(opt) = commit_sched::harness::oracle_opt(a.alg, &inst) {
            println!(
                "optimum {opt:.6}, ratio {:.6}",
                commit_sched::harness::ratio(opt, run.accepted_volume())
            );
        } else {
            println!("optimum unavailable for {} jobs", inst.jobs.len());
        }
    }
    let v = verify_schedule(&run.schedule, &run.accepted);
    if v.is_empty() {
        println!("all {} accepted jobs complete by their deadlines", run.accepted.len());
        Ok(())
    } else {
        for x in &v {
            eprintln!("{x}");
        }
        Err(Failure::Violation(format!("{} schedule violations", v.len())))
    }
}
