use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::Failure;

#[derive(Debug, Parser)]
#[command(name = "cpofdm", version, about = "CP-OFDM MIMO radar pulse design, simulation and comparison")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Overrides the config's global seed
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Overrides the Monte Carlo trial count
    #[arg(long, global = true, value_name = "N")]
    trials: Option<usize>,

    /// Worker threads (defaults to all cores)
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Design a pulse set (MICF or paraunitary) and write the container and metrics
    Design,
    /// Check a pulse set and the numerical kernels; exit 3 if a check fails
    Verify,
    /// Simulate a scene and reconstruct the range profiles
    Simulate,
    /// Run the OFDM chain and matched-filter baselines on identical seeds
    Compare,
    /// MICF Monte Carlo study: CDFs and qualifying counts
    Montecarlo,
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("--config PATH is required".into()))?;
    let cfg = config::RunConfig::load(path).map_err(Failure::Config)?;
    let opts = commands::Options { seed: cli.seed.unwrap_or(cfg.seed), trials: cli.trials };
    let outputs = match cli.command {
        Command::Design => commands::design(&cfg, &opts)?,
        Command::Verify => commands::verify(&cfg, &opts)?,
        Command::Simulate => commands::simulate(&cfg, &opts)?,
        Command::Compare => commands::compare(&cfg, &opts)?,
        Command::Montecarlo => commands::montecarlo(&cfg, &opts)?,
    };
    outputs.write(&cli.out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
