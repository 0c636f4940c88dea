//! `mmreg`: synthesize sequences, derive flow, build patch datasets, train
//! and evaluate offset classifiers.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use commands::{DatasetArgs, EvalArgs, FlowArgs, SynthArgs, TrainArgs};

/// Depth/video misalignment classification.
///
/// Every subcommand accepts `--config FILE` with `key=value` lines named
/// after its long flags. Flags given on the command line win over the file,
/// which wins over the defaults. The resolved configuration is written next
/// to each command's outputs. MMREG_THREADS caps the worker count (0 = all
/// cores).
#[derive(Debug, Parser)]
#[command(name = "mmreg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic RGB + depth sequence.
    Synth(SynthArgs),
    /// Add grayscale and optical-flow channels to a sequence.
    Flow(FlowArgs),
    /// Build a labeled patch index over every offset class.
    Dataset(DatasetArgs),
    /// Train a classifier on a patch dataset.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a sequence.
    Eval(EvalArgs),
}

fn run() -> anyhow::Result<()> {
    let args = config::expand_config_file(std::env::args_os().collect())?;
    let command = Cli::command();
    let matches = command.clone().get_matches_from(args);
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    config::init_thread_pool()?;
    let resolved = config::resolved(&command, &matches);
    match cli.command {
        Command::Synth(a) => commands::synth(a, resolved),
        Command::Flow(a) => commands::flow(a, resolved),
        Command::Dataset(a) => commands::dataset(a, resolved),
        Command::Train(a) => commands::train(a, resolved),
        Command::Eval(a) => commands::eval(a, resolved),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
