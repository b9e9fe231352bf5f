//! `roadsift` command-line tool.
//!
//! Every subcommand accepts `--config <file.json>`; keys mirror the long
//! flags (snake_case) and flags given on the command line win. Exit codes:
//! 0 success, 2 usage or configuration error, 3 runtime failure.

mod can;
mod config;
mod error;
mod experiment;
mod features;
mod generate;
mod models;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "roadsift", version, about = "Predict and select lane-keeping simulation tests")]
struct Cli {
    /// JSON file with settings for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate random roads, label them with the driving oracle and extract features.
    Generate(generate::GenerateArgs),
    /// Compute the static road features of road files or a simulation file.
    ExtractFeatures(features::ExtractArgs),
    /// Cross-validate model families on a feature CSV and keep the best model.
    Benchmark(models::BenchmarkArgs),
    /// Evaluate the hyperparameter grid of one model family.
    GridSearch(models::GridArgs),
    /// Rank features by information gain and correlation with the label.
    RankFeatures(features::RankArgs),
    /// Label tests safe or unsafe with a trained model, without running them.
    Predict(models::PredictArgs),
    /// Run a FIX, REACH or real-time selection experiment from a config file.
    Experiment(experiment::ExperimentArgs),
    /// Convert simulation traces into CAN playback CSV files.
    CanConvert(can::ConvertArgs),
    /// Stream playback CSV files to a file or TCP sink.
    CanPlay(can::PlayArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Generate(a) => generate::run(config::layer(a, config)?),
        Command::ExtractFeatures(a) => features::extract(config::layer(a, config)?),
        Command::Benchmark(a) => models::benchmark(config::layer(a, config)?),
        Command::GridSearch(a) => models::grid(config::layer(a, config)?),
        Command::RankFeatures(a) => features::rank(config::layer(a, config)?),
        Command::Predict(a) => models::predict(config::layer(a, config)?),
        Command::Experiment(a) => experiment::run(a, config),
        Command::CanConvert(a) => can::convert(config::layer(a, config)?),
        Command::CanPlay(a) => can::play(config::layer(a, config)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
