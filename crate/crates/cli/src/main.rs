//! `softrank`: soft-rank statistics, knockoff training and FDR benchmarks from
//! the command line.
//!
//! Exit status: 0 success, 1 usage or config error, 2 data error, 3 numeric failure.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use softrank::experiment::Statistic;

use crate::commands::{FilterArgs, Globals, StatArgs};
use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "softrank", version, about = "Soft-rank statistics and knockoff benchmarks")]
struct Cli {
    /// TOML parameter document; unknown keys are rejected
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Global seed (overrides the config file)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print a two-sample statistic between two CSV matrices
    Stat {
        x: PathBuf,
        y: PathBuf,
        /// energy, mmd, re, sre or srmmd
        #[arg(long)]
        statistic: Option<String>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Shifted-uniform saturation sweep
    Saturate,
    /// Train a knockoff generator on a CSV matrix
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Sample knockoffs from a saved model, or export synthetic features
    Generate {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Knockoff filter on features, knockoffs and a response
    Filter {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        knockoffs: PathBuf,
        #[arg(long)]
        y: PathBuf,
        /// Zero-based true support, comma separated, for FDP/power
        #[arg(long, value_delimiter = ',')]
        support: Option<Vec<usize>>,
    },
    /// synth -> train -> knockoffs -> LASSO -> threshold over amplitudes and repetitions
    Bench {
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(cli.config.as_deref())?;
    let threads = cli.threads.or(cfg.threads).unwrap_or(0);
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let g = Globals {
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        out: cli.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("softrank-out")),
        threads: rayon::current_num_threads(),
    };
    let report = |dir: PathBuf| println!("wrote {}", dir.display());
    match cli.command {
        Command::Stat {
            x,
            y,
            statistic,
            epsilon,
        } => {
            let statistic = statistic
                .map(|s| s.parse::<Statistic>().map_err(|e| CliError::Usage(e.to_string())))
                .transpose()?;
            let v = commands::stat(&cfg, &StatArgs { x, y, statistic, epsilon })?;
            println!("{}", softrank::io::format_f64(v));
        }
        Command::Saturate => report(commands::saturate(&cfg, &g)?),
        Command::Train { data, epochs } => report(commands::train_cmd(&cfg, &g, &data, epochs)?),
        Command::Generate { model, data } => report(commands::generate(&cfg, &g, model.as_deref(), data.as_deref())?),
        Command::Filter {
            x,
            knockoffs,
            y,
            support,
        } => report(commands::filter(&cfg, &g, &FilterArgs { x, knockoffs, y, support })?),
        Command::Bench { repetitions, epochs } => report(commands::bench(&cfg, &g, repetitions, epochs)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
