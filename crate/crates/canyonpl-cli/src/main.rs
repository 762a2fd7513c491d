//! `canyonpl`: command-line surface for the street-canyon path loss
//! pipeline.
//!
//! Subcommands cover the full workflow: `synth` writes seeded synthetic
//! scene datasets, `featurize` extracts tabular features, `train-ae`
//! fits the facade autoencoder, `train` fits one regression family,
//! `evaluate` runs a train/test protocol, `importance` ranks features,
//! and `report` renders SVG figures from an evaluation report.
//!
//! Every subcommand is deterministic given its flags and seeds. Exit
//! codes: 0 success, 1 runtime failure, 2 usage or config error.

mod commands;
mod config;
mod plots;

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

/// Failure with a distinct exit code: usage errors exit 2, runtime
/// failures exit 1 (clap's own parse errors also exit 2).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(canyonpl::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl From<canyonpl::Error> for CliError {
    fn from(e: canyonpl::Error) -> CliError {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Runtime(canyonpl::Error::from(e))
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "canyonpl",
    version,
    about = "Street-canyon mm-wave path loss pipeline"
)]
struct Cli {
    /// JSON config file whose keys mirror the long flags
    /// (flags override the file; the file overrides defaults).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded synthetic street-canyon dataset.
    Synth(commands::SynthArgs),
    /// Extract a feature table (CSV) from a scene dataset.
    Featurize(commands::FeaturizeArgs),
    /// Train the facade autoencoder on a scene dataset.
    TrainAe(commands::TrainAeArgs),
    /// Train one regression family on the full dataset.
    Train(commands::TrainArgs),
    /// Run an evaluation protocol and write report files.
    Evaluate(commands::EvaluateArgs),
    /// Rank clutter features by cross-validated lasso weight.
    Importance(commands::ImportanceArgs),
    /// Render SVG figures from an evaluation report.
    Report(commands::ReportArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = config::RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(args) => commands::cmd_synth(&args, &cfg),
        Command::Featurize(args) => commands::cmd_featurize(&args, &cfg),
        Command::TrainAe(args) => commands::cmd_train_ae(&args, &cfg),
        Command::Train(args) => commands::cmd_train(&args, &cfg),
        Command::Evaluate(args) => commands::cmd_evaluate(&args, &cfg),
        Command::Importance(args) => commands::cmd_importance(&args, &cfg),
        Command::Report(args) => commands::cmd_report(&args, &cfg),
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    };
    std::process::exit(code);
}
