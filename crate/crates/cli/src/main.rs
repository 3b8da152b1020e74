use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use recal_cli::commands::{cmd_report, cmd_run, cmd_split};
use recal_cli::config::ExperimentConfig;
use recal_cli::CliError;

/// Recommender calibration experiments on MovieLens-style rating data.
#[derive(Parser)]
#[command(name = "recal", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the ratings and persist the seeded train/test split.
    Split {
        /// Experiment config file.
        #[arg(long)]
        config: PathBuf,
        /// Override the output directory from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the master seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the full experiment: split, grid search, recommend, measure.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the summary table of a completed run directory.
    Report {
        /// Run directory (defaults to the config's output directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(
    path: &PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<ExperimentConfig, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))?;
    let mut config = ExperimentConfig::parse(BufReader::new(file))?;
    if let Some(out) = out {
        config.out_dir = out;
    }
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Split { config, out, seed } => {
            let config = load_config(&config, out, seed)?;
            cmd_split(&config)?;
            Ok(())
        }
        Command::Run { config, out, seed } => {
            let config = load_config(&config, out, seed)?;
            let outcome = cmd_run(&config)?;
            let failures = outcome.failures();
            if failures.is_empty() {
                eprintln!("run complete: {}", outcome.out_dir.display());
                Ok(())
            } else {
                for (algorithm, message) in &failures {
                    eprintln!("[{algorithm}] failed: {message}");
                }
                Err(CliError::Experiment(format!(
                    "{} of {} algorithms failed",
                    failures.len(),
                    outcome.algorithms.len()
                )))
            }
        }
        Command::Report { out, config } => {
            let dir = match (out, config) {
                (Some(dir), _) => dir,
                (None, Some(config_path)) => load_config(&config_path, None, None)?.out_dir,
                (None, None) => {
                    return Err(CliError::Config(
                        "report needs --out <dir> or --config <file>".into(),
                    ))
                }
            };
            cmd_report(&dir, &mut std::io::stdout())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
