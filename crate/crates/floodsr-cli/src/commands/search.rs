use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use floodsr::net::NetConfig;
use floodsr::synth::open_dataset;
use floodsr::train::{random_search, write_trial_table, SearchSpace, TrainConfig};
use floodsr::Result;
use serde::Serialize;

use crate::manifest::write_run_manifest;

#[derive(Args, Serialize)]
pub struct SearchArgs {
    /// Dataset directory, or the manifest.json inside one.
    #[arg(long)]
    pub data: PathBuf,

    /// Work directory; receives per-trial checkpoints, trials.csv, best.json.
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, default_value_t = SearchSpace::default().budget)]
    pub budget: usize,

    #[arg(long, default_value_t = SearchSpace::default().seed)]
    pub seed: u64,

    /// Epochs per trial; trials share everything but the sampled values.
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,

    #[arg(long, default_value_t = TrainConfig::default().batch)]
    pub batch: usize,
}

#[derive(Serialize)]
struct BestReport<'a> {
    best_trial: usize,
    net_config: &'a NetConfig,
    train_config: &'a TrainConfig,
}

pub fn run(args: SearchArgs) -> Result<()> {
    let started = Instant::now();
    let (manifest, base) = open_dataset(&args.data)?;
    let space = SearchSpace {
        budget: args.budget,
        seed: args.seed,
        ..SearchSpace::default()
    };
    let train_template = TrainConfig { batch: args.batch, ..TrainConfig::default() };

    let outcome = random_search::<f64>(
        &space,
        &manifest,
        &base,
        &NetConfig::default(),
        &train_template,
        args.epochs,
        &args.out,
    )?;

    let table = args.out.join("trials.csv");
    write_trial_table(&table, &outcome.trials)?;
    let best_path = args.out.join("best.json");
    let best = BestReport {
        best_trial: outcome.best_trial,
        net_config: &outcome.net_config,
        train_config: &outcome.train_config,
    };
    let mut text = serde_json::to_string_pretty(&best)?;
    text.push('\n');
    std::fs::write(&best_path, text)?;

    write_run_manifest(
        "search",
        &args,
        Some(args.seed),
        &[&args.data],
        &[&table, &best_path],
        started,
        &args.out,
    )?;
    eprintln!(
        "search: best trial {} of {} -> {}",
        outcome.best_trial,
        outcome.trials.len(),
        best_path.display()
    );
    Ok(())
}
