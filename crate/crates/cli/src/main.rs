//! `motifdiff`: batch entry points for the motif discovery pipeline.
//!
//! ```text
//! motifdiff synth    --out data
//! motifdiff sample   --dataset data/dataset.jsonl --k 4 --out s4
//! motifdiff train    --samples s4/samples.jsonl --out models
//! motifdiff search   --dataset data/dataset.jsonl --models models --out found
//! ```
//!
//! Exit status is 0 on success, 2 for invalid input or configuration, 3 for
//! runtime failures (sampler stalls, numerical trouble) and 4 for I/O.

mod commands;
mod config;
mod fail;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use fail::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "motifdiff", version, about = "Frequent induced subgraph discovery with a graph diffusion estimator")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker cap. Defaults to MOTIFDIFF_THREADS, then available parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic DAG set with planted motifs.
    Synth(SynthArgs),
    /// Draw connected induced k-subgraphs from a dataset.
    Sample(SampleArgs),
    /// Train a denoiser on a sample dump.
    Train(TrainArgs),
    /// Estimate the log generative probability of each graph in a file.
    Score(ScoreArgs),
    /// Beam search for frequent patterns, then count the best exactly.
    Search(SearchArgs),
    /// Rank correlation of a method's output against the exact census.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub num_graphs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// ars, nrs, rand-esu, rand-fase or exact-esu.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub tc: Option<usize>,
    /// Write one representative per class instead of every instance.
    #[arg(long)]
    pub distinct: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Stem of the output files; defaults to `model-k<size>`.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub graphs: PathBuf,
    /// Monte Carlo trials per graph.
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Directory holding `model-k<size>.ckpt` for every size 4..=k_max.
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    /// A sample dump; classes are weighted by how often they were drawn.
    #[arg(long, conflicts_with = "scores")]
    pub samples: Option<PathBuf>,
    /// A `score` CSV; needs the scored graphs via `--graphs`.
    #[arg(long, requires = "graphs")]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub graphs: Option<PathBuf>,
    /// zero-fill or require.
    #[arg(long)]
    pub missing: Option<String>,
}

fn resolve_threads(flag: Option<usize>, cfg: &mut RunConfig) -> CliResult<()> {
    let from_env = || {
        std::env::var("MOTIFDIFF_THREADS")
            .ok()
            .map(|v| v.parse::<usize>().map_err(|_| CliError::usage(format!("MOTIFDIFF_THREADS={v:?} is not a count"))))
            .transpose()
    };
    let n = match flag.or(cfg.threads) {
        Some(n) => n,
        None => from_env()?.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
    };
    if n == 0 {
        return Err(CliError::usage("threads must be at least 1"));
    }
    cfg.threads = Some(n);
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = RunConfig::load(cli.global.config.as_deref())?;
    if let Some(s) = cli.global.seed {
        cfg.seed = s;
    }
    resolve_threads(cli.global.threads, &mut cfg)?;
    let out = &cli.global.out;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    match cli.command {
        Command::Synth(a) => commands::synth(cfg, &a, out),
        Command::Sample(a) => commands::sample(cfg, &a, out),
        Command::Train(a) => commands::train(cfg, &a, out),
        Command::Score(a) => commands::score(cfg, &a, out),
        Command::Search(a) => commands::search(cfg, &a, out),
        Command::Evaluate(a) => commands::evaluate(cfg, &a, out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
