use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use floodsr::net::NetConfig;
use floodsr::synth::open_dataset;
use floodsr::train::{train, write_epoch_log, TrainConfig};
use floodsr::Result;
use serde::Serialize;

use crate::manifest::write_run_manifest;

#[derive(Args, Serialize)]
pub struct TrainArgs {
    /// Dataset directory, or the manifest.json inside one.
    #[arg(long)]
    pub data: PathBuf,

    /// Checkpoint output path.
    #[arg(long)]
    pub out: PathBuf,

    /// Epoch log CSV; defaults to train_log.csv beside the checkpoint.
    #[arg(long)]
    pub log: Option<PathBuf>,

    #[arg(long, default_value_t = NetConfig::default().base_features)]
    pub features: usize,

    #[arg(long, default_value_t = NetConfig::default().blocks)]
    pub blocks: usize,

    #[arg(long, default_value_t = NetConfig::default().layers_per_block)]
    pub layers: usize,

    #[arg(long, default_value_t = NetConfig::default().growth)]
    pub growth: usize,

    /// Enable the per-block channel attention gate.
    #[arg(long)]
    pub attention: bool,

    #[arg(long, default_value_t = NetConfig::default().attention_reduction)]
    pub reduction: usize,

    /// Per-stage upsampling factors; their product is the scale.
    #[arg(long, value_delimiter = ',', default_values_t = NetConfig::default().upsample_plan)]
    pub upsample: Vec<usize>,

    #[arg(long, default_value_t = TrainConfig::default().eta)]
    pub eta: f64,

    #[arg(long, default_value_t = TrainConfig::default().lr0)]
    pub lr0: f64,

    #[arg(long, default_value_t = TrainConfig::default().decay)]
    pub decay: f64,

    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,

    #[arg(long, default_value_t = TrainConfig::default().batch)]
    pub batch: usize,

    #[arg(long, default_value_t = TrainConfig::default().seed)]
    pub seed: u64,
}

pub fn run(args: TrainArgs) -> Result<()> {
    let started = Instant::now();
    let (manifest, base) = open_dataset(&args.data)?;
    let net_cfg = NetConfig {
        base_features: args.features,
        blocks: args.blocks,
        layers_per_block: args.layers,
        growth: args.growth,
        attention: args.attention,
        attention_reduction: args.reduction,
        upsample_plan: args.upsample.clone(),
        ..NetConfig::default()
    };
    let tc = TrainConfig {
        eta: args.eta,
        lr0: args.lr0,
        decay: args.decay,
        epochs: args.epochs,
        batch: args.batch,
        seed: args.seed,
        ..TrainConfig::default()
    };

    let outcome = train::<f64>(&manifest, &base, &net_cfg, &tc, &args.out)?;
    let log_path = args
        .log
        .clone()
        .unwrap_or_else(|| args.out.with_file_name("train_log.csv"));
    write_epoch_log(&log_path, &outcome.log)?;

    write_run_manifest(
        "train",
        &args,
        Some(args.seed),
        &[&args.data],
        &[&args.out, &log_path],
        started,
        &args.out,
    )?;
    let best = &outcome.log[outcome.best_epoch];
    eprintln!(
        "train: best epoch {} val total {} -> {}",
        outcome.best_epoch,
        best.val_total,
        args.out.display()
    );
    Ok(())
}
