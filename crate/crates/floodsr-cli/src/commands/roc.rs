use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use floodsr::eval::{auc, roc};
use floodsr::raster::{BinaryGrid, FractionGrid};
use floodsr::synth::open_dataset;
use floodsr::wfm::{BandLimits, ScaleFactor};
use floodsr::{Error, Result};
use serde::Serialize;

use crate::manifest::write_run_manifest;
use crate::predictors::{pool_split, split_from_str, Predictor};

#[derive(Args, Serialize)]
pub struct RocArgs {
    /// Dataset directory, or the manifest.json inside one.
    #[arg(long)]
    pub data: PathBuf,

    #[arg(long, default_value = "test")]
    pub split: String,

    /// Checkpoint of a trained network; the curve sweeps its probabilities.
    #[arg(long)]
    pub model: PathBuf,

    /// Curve path (CSV). The area lands next to it as <name>.auc.json.
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, default_value_t = 0.25)]
    pub band_lo: f64,

    #[arg(long, default_value_t = 0.85)]
    pub band_hi: f64,

    #[arg(long, default_value_t = 10)]
    pub factor: usize,
}

pub fn run(args: RocArgs) -> Result<()> {
    let started = Instant::now();
    let (manifest, base) = open_dataset(&args.data)?;
    let pred = Predictor::from_checkpoint(&args.model)?;
    let split = split_from_str(&args.split)?;
    let band = BandLimits::new(args.band_lo, args.band_hi)?;
    let f = ScaleFactor::new(args.factor)?;

    let pooled = pool_split(&pred, &manifest, &base, split, band, f, 0.5, true)?;
    let (scores, labels) = pooled
        .scored
        .ok_or_else(|| Error::InvalidConfig("model produced no probability scores".into()))?;
    let len = scores.len();
    let grid = FractionGrid::new(1, len, scores)?;
    let truth = BinaryGrid::new(1, len, labels.iter().map(|&b| b as u8).collect())?;
    let mask = BinaryGrid::from_fn(1, len, |_, _| true);
    let points = roc(&grid, &truth, &mask)?;
    let area = auc(&points);

    let mut csv = String::from("theta,fpr,tpr\n");
    for p in &points {
        writeln!(csv, "{},{},{}", p.threshold, p.fpr, p.tpr).expect("string write");
    }
    std::fs::write(&args.out, csv)?;

    let auc_path = args.out.with_extension("auc.json");
    std::fs::write(&auc_path, format!("{{\"auc\": {area}}}\n"))?;
    eprintln!("{}: auc {:.4} from {} operating points", pred.label(), area, points.len());

    write_run_manifest(
        "roc",
        &args,
        None,
        &[&args.data, &args.model],
        &[&args.out, &auc_path],
        started,
        &args.out,
    )?;
    Ok(())
}
