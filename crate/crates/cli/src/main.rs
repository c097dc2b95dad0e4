use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use equilivest::ErrorClass;

mod commands;
mod config;
mod live;
mod output;
mod scenario;

#[derive(Parser)]
#[command(
    name = "equilivest",
    version,
    about = "Balance vest host tools: record, simulate, analyze, train and run feedback"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options every subcommand understands.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// TOML configuration file with one section per module.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set filter.alpha=0.95`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Record incoming telemetry packets until interrupted or idle.
    Listen(commands::ListenArgs),
    /// Run filter and detectors over a recording and report.
    Analyze(commands::AnalyzeArgs),
    /// Generate a synthetic recording or stream it over UDP.
    Simulate(commands::SimulateArgs),
    /// Fit a fall-risk model on annotated recordings.
    Train(commands::TrainArgs),
    /// Closed-loop processing of a recording or a live stream.
    Run(commands::RunArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let class = err.chain().find_map(|e| e.downcast_ref::<equilivest::Error>()).map(equilivest::Error::class);
    match class {
        Some(ErrorClass::Argument) => 3,
        Some(ErrorClass::Config) => 4,
        Some(ErrorClass::Io) => 5,
        Some(ErrorClass::Protocol) => 6,
        Some(ErrorClass::Format) => 7,
        Some(ErrorClass::Analysis) => 8,
        Some(ErrorClass::Model) => 9,
        None if err.chain().any(|e| e.is::<std::io::Error>()) => 5,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Listen(a) => commands::listen(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Train(a) => commands::train(a),
        Command::Run(a) => commands::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
