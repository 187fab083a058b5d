use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use commands::{Overrides, StatsArgs};
use config::{parse_quota, JudgeKind, UsageError};

#[derive(Parser)]
#[command(name = "refinebench", version, about = "Generate / judge / critique / refine experiments for competitive programming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunFlags {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long, value_enum)]
    judge: Option<JudgeKind>,
    /// Reset contexts before every refinement.
    #[arg(long)]
    stateless: bool,
    #[arg(long)]
    max_refinements: Option<u32>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict to these workflow ids (repeatable).
    #[arg(long = "workflow")]
    workflows: Vec<String>,
}

impl From<&RunFlags> for Overrides {
    fn from(f: &RunFlags) -> Self {
        Overrides {
            seed: f.seed,
            parallelism: f.parallelism,
            judge: f.judge,
            stateless: f.stateless,
            max_refinements: f.max_refinements,
            out: f.out.clone(),
            workflows: f.workflows.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate and normalize a directory of problem records.
    Ingest {
        source: PathBuf,
        /// Write normalized records and the manifest here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every configured workflow over the corpus (resumable).
    Run(RunFlags),
    /// Paired stateful / stateless run of one workflow.
    Ablate {
        #[command(flatten)]
        flags: RunFlags,
        /// Problems to sample per rating, e.g. 1200:8 (repeatable).
        #[arg(long = "quota", value_parser = parse_quota)]
        quotas: Vec<(u32, usize)>,
    },
    /// Zero-shot, single-round, multi-round stateless and stateful variants.
    Baselines(RunFlags),
    /// Summary tables and plot data from ledgers.
    Report {
        #[arg(required = true)]
        ledgers: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// McNemar, bootstrap CI, Cohen's h and Holm correction between arms.
    Stats {
        #[arg(required = true)]
        ledgers: Vec<PathBuf>,
        /// Comparison between two arm labels, A=B (repeatable).
        #[arg(long = "pair")]
        pairs: Vec<String>,
        #[arg(long, default_value_t = refinebench::stats::DEFAULT_RESAMPLES)]
        resamples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print recorded trajectories and check them for consistency.
    Replay {
        ledger: PathBuf,
        #[arg(long)]
        problem: Option<String>,
    },
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest { source, out } => commands::ingest(&source, out.as_deref()),
        Command::Run(f) => commands::run(&f.config, &Overrides::from(&f)),
        Command::Ablate { flags, quotas } => commands::ablate(&flags.config, &Overrides::from(&flags), &quotas),
        Command::Baselines(f) => commands::baselines(&f.config, &Overrides::from(&f)),
        Command::Report { ledgers, out } => commands::report(&ledgers, &out),
        Command::Stats { ledgers, pairs, resamples, seed, alpha, out } => commands::stats(StatsArgs {
            ledgers: &ledgers,
            pairs: &pairs,
            resamples,
            seed,
            alpha,
            out: out.as_deref(),
        }),
        Command::Replay { ledger, problem } => commands::replay(&ledger, problem.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
