//! `bdsde` — experiment front end for the BDSDE simulation toolkit.
//!
//! Two subcommands:
//!
//! - `bdsde run --config experiment.json [--output-dir DIR] [--threads N]
//!   [--seed S]` executes the experiment described by a strict-schema JSON
//!   config and writes machine-readable reports plus a resolved-config echo.
//! - `bdsde list-catalog` prints the built-in problems with their validated
//!   assumption profile and closed-form availability.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 I/O failure. Errors are printed as a single machine-parsable line
//! `error[<category>]: <message>`.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use error::CliError;
use output::{OutputDir, Provenance};

#[derive(Parser)]
#[command(name = "bdsde", version, about = "BDSDE simulation experiments")]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Run the experiment described by a JSON config file.
    Run {
        /// Path to the experiment configuration.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Cap the worker-thread count (0 = one thread per core). Results
        /// do not depend on this value.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the built-in problem catalog.
    ListCatalog,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let message = err.to_string().replace('\n', "; ");
            eprintln!("error[{}]: {}", err.category(), message);
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        CliCommand::Run {
            config,
            output_dir,
            threads,
            seed,
        } => run(config, output_dir, threads, seed),
        CliCommand::ListCatalog => {
            println!("{}", commands::list_catalog()?);
            Ok(())
        }
    }
}

fn run(
    config_path: PathBuf,
    output_dir: Option<PathBuf>,
    threads: usize,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&config_path).map_err(|e| {
        CliError::Io(format!("cannot read config {}: {e}", config_path.display()))
    })?;
    let mut config = ExperimentConfig::parse(&text)?;
    if let Some(dir) = output_dir {
        config.output_dir = dir;
    }
    if let Some(seed) = seed {
        config.monte_carlo.master_seed = seed;
    }

    let resolved = serde_json::to_string_pretty(&config)
        .map_err(|e| CliError::Io(format!("cannot serialize resolved config: {e}")))?;
    let provenance = Provenance::new(&resolved, config.monte_carlo.master_seed);
    let out = OutputDir::create(&config.output_dir, provenance)?;
    out.write_resolved_config(&resolved)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| commands::run(&config, &out))
}
