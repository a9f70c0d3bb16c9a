//! `floodsr`: command-line orchestration of the flood-map super-resolution
//! pipeline. Every command writes its outputs to files, leaves a run manifest
//! beside them, and is byte-reproducible under identical inputs and seeds
//! (the manifest's wall-clock field excepted).

mod commands;
mod manifest;
mod predictors;

use std::panic::AssertUnwindSafe;

use clap::{Parser, Subcommand};
use floodsr::Error;

#[derive(Parser)]
#[command(
    name = "floodsr",
    version,
    about = "Super-resolve coarse water-fraction rasters into binary flood maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset of FIM/WFM tile pairs.
    Synth(commands::synth::SynthArgs),
    /// Train the super-resolution network on a dataset split.
    Train(commands::train::TrainArgs),
    /// Random hyperparameter search over the documented space.
    Search(commands::search::SearchArgs),
    /// Apply a trained checkpoint to one WFM.
    Downscale(commands::downscale::DownscaleArgs),
    /// Apply an interpolation or naive baseline to one WFM.
    Baseline(commands::baseline::BaselineArgs),
    /// Score a predictor over a dataset split and write an evaluation report.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Export a pooled ROC curve and its AUC for a checkpoint.
    Roc(commands::roc::RocArgs),
    /// Pairwise paired-test comparison of several predictors.
    Compare(commands::compare::CompareArgs),
    /// Render rasters to grayscale images, optionally as a difference map.
    Render(commands::render::RenderArgs),
}

/// Exit code classes: 2 rejects the invocation, 3 rejects the data it names,
/// 4 reports a defect in the program itself.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_)
        | Error::EmptyBudget
        | Error::BadSize(_)
        | Error::ChannelIndivisible { .. } => 2,
        Error::NonFiniteActivation(_) | Error::DivergedLoss(_) => 4,
        _ => 3,
    }
}

fn run(cli: Cli) -> floodsr::Result<()> {
    match cli.command {
        Command::Synth(args) => commands::synth::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Search(args) => commands::search::run(args),
        Command::Downscale(args) => commands::downscale::run(args),
        Command::Baseline(args) => commands::baseline::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
        Command::Roc(args) => commands::roc::run(args),
        Command::Compare(args) => commands::compare::run(args),
        Command::Render(args) => commands::render::run(args),
    }
}

fn main() {
    let cli = Cli::parse();
    // A quiet hook keeps the error channel to exactly one parsable line.
    std::panic::set_hook(Box::new(|_| {}));
    let code = match std::panic::catch_unwind(AssertUnwindSafe(move || run(cli))) {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
        Err(_) => {
            eprintln!("error: internal: unexpected panic");
            4
        }
    };
    std::process::exit(code);
}
