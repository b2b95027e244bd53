//! `casdet`: corpus generation, training, prediction, evaluation, latency
//! benchmarking, and report emission for the detection pipeline.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::FileConfig;

#[derive(Debug, Parser)]
#[command(
    name = "casdet",
    version,
    about = "Continuous adventitious lung-sound detection pipeline"
)]
struct Cli {
    /// TOML config file; command-line flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labeled synthetic corpus (WAV + label files + manifest)
    Synth(commands::synth::SynthArgs),
    /// Cross-validated training: checkpoints, history CSVs, and a summary
    Train(commands::train::TrainArgs),
    /// Per-recording probabilities and detected events from a checkpoint
    Predict(commands::predict::PredictArgs),
    /// Segment/event metrics and a ROC curve against ground-truth labels
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Median inference latency per variant, with ratios to the baseline
    Benchmark(commands::benchmark::BenchmarkArgs),
    /// Human-readable report and ROC plot from evaluation artifacts
    Report(commands::report::ReportArgs),
}

/// Usage problems exit 1; everything else defers to the library's own
/// classification (data errors 2, numeric failures 3).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(casdet_core::Error),
}

impl From<casdet_core::Error> for CliError {
    fn from(e: casdet_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            // library error messages already embed their source (path, line,
            // cause), so the chain is not walked again
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => e.exit_code() as u8,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(args) => commands::synth::run(args, &file.synth),
        Command::Train(args) => commands::train::run(args, &file.train),
        Command::Predict(args) => commands::predict::run(args, &file.predict),
        Command::Evaluate(args) => commands::evaluate::run(args, &file.evaluate),
        Command::Benchmark(args) => commands::benchmark::run(args, &file.benchmark),
        Command::Report(args) => commands::report::run(args, &file.report),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
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
