//! `circlesync`: runs one experiment from a JSON config and writes its
//! report files. Exit status 0 on success, 1 on usage or I/O errors, 2 when
//! the analysis itself ends in one of its documented errors.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use commands::{Context, Failure};
use config::ExperimentConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "circlesync", version, about = "Random iterations of circle homeomorphisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config, defaults to `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the grid size.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Worker threads for the parallel stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Synchronization, factorization or invariance.
    Classify,
    /// Stationary measure of the system.
    Invariant,
    /// Coupled trajectory pairs and their limiting distances.
    Sync,
    /// Distances preserved by every map.
    Preserved,
    /// Fiber measures and their average.
    Fibers,
    /// One random orbit.
    Simulate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Invariant => "invariant",
            Command::Sync => "sync",
            Command::Preserved => "preserved",
            Command::Fibers => "fibers",
            Command::Simulate => "simulate",
        }
    }
}

fn setup(cli: &Cli) -> Result<Context, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Usage("--config PATH is required".into()))?;
    let mut config = ExperimentConfig::load(path).map_err(Failure::Usage)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(grid) = cli.grid {
        config.grid_size = grid;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    config.out = Some(out.clone());
    let ifs = config.validate().map_err(Failure::Usage)?;
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Usage(format!("--jobs: {e}")))?;
    }
    commands::ensure_dir(&out)?;
    Ok(Context { config, ifs, out })
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let ctx = setup(cli)?;
    let outcome = match cli.command {
        Command::Classify => commands::classify(&ctx),
        Command::Invariant => commands::invariant(&ctx),
        Command::Sync => commands::sync(&ctx),
        Command::Preserved => commands::preserved(&ctx),
        Command::Fibers => commands::fibers(&ctx),
        Command::Simulate => commands::simulate(&ctx),
    };
    match &outcome {
        Ok(result) => commands::write_summary(&ctx, cli.command.name(), Ok(result))?,
        Err(Failure::Analysis(e)) => commands::write_summary(&ctx, cli.command.name(), Err(e))?,
        Err(_) => {}
    }
    outcome.map(|_| ())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(path, e)) => {
            eprintln!("error: {}: {e}", path.display());
            ExitCode::from(1)
        }
        Err(Failure::Analysis(e)) if e.is_analysis_outcome() => {
            eprintln!("{}: {e}", e.name());
            ExitCode::from(2)
        }
        Err(Failure::Analysis(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
