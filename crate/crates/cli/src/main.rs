use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use distrank::harness::{self, Algorithm, ExperimentConfig, ScheduleSpec, WeightPolicy};
use distrank::Error;

/// Distributed PageRank engines and experiment runner.
#[derive(Parser, Debug)]
#[command(name = "distrank", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dense solve; writes `page,rank` rows.
    Exact(Common),
    /// Centralized power iteration.
    Power(Common),
    /// Synchronous push: every page sends every step.
    Sync(Common),
    /// One page per step.
    Gossip(Common),
    /// A set of pages per step.
    Multi(Common),
    /// One group of the partition per step.
    Cluster(Common),
    /// Several runs on one graph aligned by cumulative updates.
    Compare {
        /// Runs as ALG[@SCHEDULE][#WEIGHTS], e.g. `gossip@uniform#indegree_plus_one`
        /// or `cluster@periodic`.
        #[arg(required = true)]
        runs: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo average of a randomized schedule.
    Mc {
        /// Engine to replicate: gossip, multi or cluster.
        #[arg(long, default_value = "gossip")]
        algorithm: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Edge list, one `src dst` pair per line.
    #[arg(long)]
    graph: PathBuf,
    /// Index base of the input files (0 or 1).
    #[arg(long, default_value_t = 0)]
    base: usize,
    /// Teleportation probability.
    #[arg(long, default_value_t = 0.15)]
    m: f64,
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    /// Stop once the error (or its certificate) drops to this value.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// uniform | round-robin | subset:<q> | periodic | sequence:<path>
    #[arg(long)]
    schedule: Option<String>,
    /// uniform | indegree_plus_one | size | file:<path>
    #[arg(long)]
    weights: Option<String>,
    /// Group label per page, one `page group` pair per line.
    #[arg(long)]
    partition: Option<PathBuf>,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record every j-th step.
    #[arg(long)]
    cadence: Option<usize>,
    #[arg(long, default_value_t = 1_000)]
    replicas: usize,
    /// Append per-page x columns to the trace.
    #[arg(long)]
    record_x: bool,
}

impl Common {
    fn config(&self, algorithm: Algorithm) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::new(&self.graph, algorithm);
        cfg.index_base = self.base;
        cfg.m = self.m;
        cfg.schedule = self.schedule.as_deref().map(str::parse).transpose()?;
        cfg.weights = self.weights.as_deref().map(str::parse).transpose()?;
        cfg.partition = self.partition.clone();
        cfg.steps = self.steps;
        cfg.tol = self.tol;
        cfg.seed = self.seed;
        cfg.replicas = self.replicas;
        cfg.out = self.out.clone();
        cfg.cadence = self.cadence;
        cfg.record_x = self.record_x;
        Ok(cfg)
    }
}

fn parse_run(spec: &str, common: &Common) -> Result<ExperimentConfig, Error> {
    let (rest, weights) = match spec.split_once('#') {
        Some((r, w)) => (r, Some(w.parse::<WeightPolicy>()?)),
        None => (spec, None),
    };
    let (alg, schedule) = match rest.split_once('@') {
        Some((a, s)) => (a, Some(s.parse::<ScheduleSpec>()?)),
        None => (rest, None),
    };
    let algorithm: Algorithm = alg.parse()?;
    let mut cfg = common.config(algorithm)?;
    cfg.schedule = schedule;
    cfg.weights = weights;
    cfg.out = None;
    if algorithm != Algorithm::Cluster {
        cfg.partition = None;
    }
    Ok(cfg)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 3,
        Error::Numerical(_) | Error::SingularBlock { .. } => 4,
        _ => 2,
    }
}

/// Prints the summary on stdout, or on stderr when the CSV already went
/// to stdout.
fn summary(csv_on_stdout: bool, line: &str) {
    if csv_on_stdout {
        eprintln!("{line}");
    } else {
        println!("{line}");
    }
}

fn stdout_err(source: io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source,
    }
}

fn single(common: Common, algorithm: Algorithm) -> Result<(), Error> {
    let cfg = common.config(algorithm)?;
    let outcome = harness::run_experiment(&cfg)?;
    if cfg.out.is_none() {
        let mut out = io::stdout().lock();
        outcome
            .write_csv(algorithm, &mut out)
            .and_then(|_| out.flush())
            .map_err(stdout_err)?;
    }
    summary(cfg.out.is_none(), &outcome.summary.to_string());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Exact(c) => single(c, Algorithm::Exact),
        Command::Power(c) => single(c, Algorithm::Power),
        Command::Sync(c) => single(c, Algorithm::Sync),
        Command::Gossip(c) => single(c, Algorithm::Gossip),
        Command::Multi(c) => single(c, Algorithm::Multi),
        Command::Cluster(c) => single(c, Algorithm::Cluster),
        Command::Compare { runs, common } => {
            let cfgs = runs
                .iter()
                .map(|r| parse_run(r, &common))
                .collect::<Result<Vec<_>, _>>()?;
            let table = harness::compare(&cfgs, common.out.as_deref())?;
            let to_stdout = common.out.is_none();
            if to_stdout {
                let mut out = io::stdout().lock();
                table
                    .write_csv(&mut out)
                    .and_then(|_| out.flush())
                    .map_err(stdout_err)?;
            }
            let (u, vals) = table.rows.last().expect("rows start at zero updates");
            for (label, v) in table.labels.iter().zip(vals) {
                summary(
                    to_stdout,
                    &format!("{label}: updates={u} final_error={v:.3e}"),
                );
            }
            Ok(())
        }
        Command::Mc { algorithm, common } => {
            let cfg = common.config(algorithm.parse()?)?;
            let mc = harness::monte_carlo(&cfg)?;
            let to_stdout = cfg.out.is_none();
            if to_stdout {
                let mut out = io::stdout().lock();
                mc.write_csv(&mut out)
                    .and_then(|_| out.flush())
                    .map_err(stdout_err)?;
            }
            if let Some(last) = mc.rows.last() {
                summary(
                    to_stdout,
                    &format!(
                        "{algorithm}: replicas={} steps={} err_mean={:.3e} err_se={:.3e}",
                        mc.replicas, last.step, last.err_mean, last.err_se
                    ),
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // `distrank ... | head` closing the pipe early is not a failure.
        Err(Error::Io { source, .. }) if source.kind() == io::ErrorKind::BrokenPipe => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
