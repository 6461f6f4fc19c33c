//! `adf`: synthetic data, kinematic POIs, index build, field evaluation,
//! POI extraction, evaluation, ablations and latency benchmarks.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::RunConfig;

/// Exit codes.
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_INTERNAL: u8 = 4;

#[derive(Debug)]
pub enum Failure {
    /// Bad flag value; names the flag.
    Usage(String),
    /// Unreadable or invalid input.
    Data(anyhow::Error),
    /// A library invariant did not hold.
    Internal(String),
}

impl From<adf_core::AdfError> for Failure {
    fn from(e: adf_core::AdfError) -> Self {
        Failure::Data(e.into())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.into())
    }
}

pub type CmdResult = std::result::Result<(), Failure>;

#[derive(Debug, Parser)]
#[command(name = "adf", version, about = "Adaptive density field POI toolkit")]
struct Cli {
    #[command(flatten)]
    run: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
struct GlobalArgs {
    /// Base kernel bandwidth (m).
    #[arg(long, global = true, default_value_t = 500.0)]
    sigma0: f64,
    /// Neighbours per field evaluation.
    #[arg(long, global = true, default_value_t = 100)]
    k: usize,
    /// Inverted lists probed per query.
    #[arg(long, global = true, default_value_t = 16)]
    nprobe: usize,
    /// Inverted lists to train; shrunk to fit the point count.
    #[arg(long, global = true)]
    nlist: Option<usize>,
    /// Use this fixed bandwidth (m) instead of score-adaptive widths.
    #[arg(long, global = true)]
    fixed_bandwidth: Option<f64>,
    /// Match distance (m).
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Per-trajectory percentile for POI extraction.
    #[arg(long, global = true, default_value_t = 75.0)]
    percentile: f64,
    /// Normalised score a kinematic POI must reach.
    #[arg(long, global = true, default_value_t = 0.75)]
    baseline_threshold: f64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Neighbour retrieval: ivf or brute (bench also accepts both).
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Output file (directory for synth). Defaults to stdout where allowed.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic flights, ground-truth onsets and a scored point cloud.
    Synth(commands::SynthArgs),
    /// Label kinematic POIs on trajectories.
    BaselinePois(commands::BaselineArgs),
    /// Train an inverted-file index over a POI CSV and save a snapshot.
    BuildIndex(commands::BuildIndexArgs),
    /// Evaluate the field at every POI or at query points.
    EvalField(commands::EvalFieldArgs),
    /// Evaluate the field along trajectories and flag per-trace percentiles.
    ExtractPois(commands::ExtractArgs),
    /// Spatially match two POI sets.
    Evaluate(commands::EvaluateArgs),
    /// Sweep bandwidth, nprobe and k against the kinematic POIs.
    Ablate(commands::AblateArgs),
    /// Time field evaluation with the index and by brute force.
    Bench(commands::BenchArgs),
}

fn run(cli: Cli) -> CmdResult {
    let g = cli.run;
    let cfg = RunConfig {
        sigma0_m: g.sigma0,
        k: g.k,
        nprobe: g.nprobe,
        nlist: g.nlist,
        fixed_bandwidth_m: g.fixed_bandwidth,
        match_threshold_m: g.threshold,
        extract_percentile: g.percentile,
        baseline_threshold: g.baseline_threshold,
        seed: g.seed,
    };
    cfg.validate()?;
    let mode = g.mode.as_deref();
    let out = g.out.as_deref();
    match cli.command {
        Command::Synth(a) => commands::synth(&cfg, &a, out),
        Command::BaselinePois(a) => commands::baseline_pois(&cfg, &a, out),
        Command::BuildIndex(a) => commands::build_index(&cfg, &a, out),
        Command::EvalField(a) => commands::eval_field(&cfg, &a, out),
        Command::ExtractPois(a) => commands::extract_pois(&cfg, &a, mode, out),
        Command::Evaluate(a) => commands::evaluate(&cfg, &a, out),
        Command::Ablate(a) => commands::ablate(&cfg, &a, out),
        Command::Bench(a) => commands::bench(&cfg, &a, mode, out),
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    match e.downcast_ref::<adf_core::AdfError>() {
        Some(a) => a.is_broken_pipe(),
        None => e
            .downcast_ref::<std::io::Error>()
            .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(e)) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}
