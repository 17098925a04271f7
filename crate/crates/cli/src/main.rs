use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use poince_cli::config::ExperimentConfig;
use poince_cli::runner::{read_results, run_to_dir};
use poince_cli::summary::{summarize, write_summary};
use poince_cli::dump::dump;

/// Poincare chaos expansions and sensitivity indices.
#[derive(Parser)]
#[command(name = "poince", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON configuration.
    Run {
        config: PathBuf,
        /// Overrides the configured base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for the replications.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory (default: the configured one, else `results`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Box-plot statistics of a results table.
    Summarize {
        results: PathBuf,
        /// Output file (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inspect one-dimensional bases.
    Basis {
        #[command(subcommand)]
        action: BasisCommand,
    },
}

#[derive(Subcommand)]
enum BasisCommand {
    /// Write eigenvalues and sampled eigenfunctions of a marginal, e.g. `gaussian:0,1@-3,3`.
    Dump {
        spec: String,
        #[arg(long, default_value_t = 5)]
        p_max: usize,
        #[arg(long, default_value_t = poince::poincare1d::DEFAULT_GRID_N)]
        grid_n: usize,
        /// Number of sampling nodes.
        #[arg(long, default_value_t = 201)]
        points: usize,
        #[arg(long, default_value = "basis")]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, jobs, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let base = config.parent().unwrap_or(Path::new("."));
            let out = out
                .or_else(|| cfg.output_dir.as_ref().map(|d| base.join(d)))
                .unwrap_or_else(|| PathBuf::from("results"));
            let rows = run_to_dir(cfg, base, &out, jobs.max(1))?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::Summarize { results, out } => {
            let file = std::fs::File::open(&results).with_context(|| format!("opening {}", results.display()))?;
            let summary = summarize(&read_results(file).with_context(|| format!("reading {}", results.display()))?)?;
            match out {
                Some(path) => write_summary(
                    &summary,
                    std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?,
                )?,
                None => write_summary(&summary, std::io::stdout().lock())?,
            }
        }
        Command::Basis { action: BasisCommand::Dump { spec, p_max, grid_n, points, out } } => {
            dump(&spec, p_max, grid_n, points)?.write(&out)?;
            eprintln!("wrote basis tables to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
