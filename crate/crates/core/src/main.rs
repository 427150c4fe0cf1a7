//! Experiment command line: configure, run, and report the rate-verification
//! suites. Each subcommand writes `results.csv`, `report.txt`, and `meta.txt`
//! into the output directory and exits nonzero when any check fails.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sgld::config::{ExperimentConfig, ExperimentKind};
use sgld::experiment::{self, ExperimentOutput};

#[derive(Parser)]
#[command(
    name = "sgld",
    version,
    about = "Langevin sampler rate-verification harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form step-size sweep: divergence and transport rate slopes
    RateSweep(RunArgs),
    /// Closed-form decaying-schedule rates along eta_i = (ell + i)^-theta
    ScheduleDecay(RunArgs),
    /// Mini-batch surrogate sweep with Monte Carlo moment validation
    SgldSweep(RunArgs),
    /// Long-run bias of pooled samples against the mixture target
    StationaryBias(RunArgs),
    /// Transport-distance contraction of two separated ensembles
    Contraction(RunArgs),
    /// Cross-module property battery; exits nonzero on any failure
    Verify(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file (flat key = value under [potential]/[sampler]/[schedule]/[experiment]);
    /// built-in defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default out/<subcommand>)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overriding the config
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 uses all cores)
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Also write two-column per-figure data files under <out>/plots
    #[arg(long)]
    emit_plot_data: bool,
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::RateSweep(_) => ExperimentKind::RateSweep,
            Command::ScheduleDecay(_) => ExperimentKind::ScheduleDecay,
            Command::SgldSweep(_) => ExperimentKind::SgldSweep,
            Command::StationaryBias(_) => ExperimentKind::StationaryBias,
            Command::Contraction(_) => ExperimentKind::Contraction,
            Command::Verify(_) => ExperimentKind::Verify,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::RateSweep(a)
            | Command::ScheduleDecay(a)
            | Command::SgldSweep(a)
            | Command::StationaryBias(a)
            | Command::Contraction(a)
            | Command::Verify(a) => a,
        }
    }
}

fn dispatch(kind: ExperimentKind, cfg: &ExperimentConfig) -> sgld::Result<ExperimentOutput> {
    match kind {
        ExperimentKind::RateSweep => experiment::rate_sweep::run(cfg),
        ExperimentKind::ScheduleDecay => experiment::schedule_decay::run(cfg),
        ExperimentKind::SgldSweep => experiment::sgld_sweep::run(cfg),
        ExperimentKind::StationaryBias => experiment::stationary_bias::run(cfg),
        ExperimentKind::Contraction => experiment::contraction::run(cfg),
        ExperimentKind::Verify => experiment::verify::run(cfg),
    }
}

fn run() -> sgld::Result<bool> {
    let cli = Cli::parse();
    let kind = cli.command.kind();
    let args = cli.command.args();

    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path, kind)?,
        None => ExperimentConfig::default_for(kind),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .map_err(|e| sgld::Error::InvalidParameter(format!("thread pool: {e}")))?;
    let output = pool.install(|| dispatch(kind, &cfg))?;

    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(kind.id()));
    let threads = if args.threads == 0 {
        pool.current_num_threads()
    } else {
        args.threads
    };
    experiment::write_output(&out_dir, &output, cfg.seed, threads, args.emit_plot_data)?;

    for c in &output.checks {
        println!(
            "{}  {}  expected {}  observed {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.expected,
            c.observed
        );
    }
    let failed = output.checks.iter().filter(|c| !c.pass).count();
    println!(
        "{}: {} ({} checks, {} failed); outputs in {}",
        kind.id(),
        if failed == 0 { "PASS" } else { "FAIL" },
        output.checks.len(),
        failed,
        out_dir.display()
    );
    Ok(failed == 0)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
