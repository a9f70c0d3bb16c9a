use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use floodsr::eval::{accuracy, auc, clopper_pearson, mcc, roc, ConfusionCounts};
use floodsr::raster::{BinaryGrid, FractionGrid};
use floodsr::synth::{open_dataset, DatasetManifest};
use floodsr::wfm::{BandLimits, ScaleFactor};
use floodsr::{Error, Result};
use serde::Serialize;

use crate::manifest::write_run_manifest;
use crate::predictors::{pool_split, split_from_str, MethodName, Predictor};

#[derive(Args, Serialize)]
pub struct EvaluateArgs {
    /// Dataset directory, or the manifest.json inside one.
    #[arg(long)]
    pub data: PathBuf,

    #[arg(long, default_value = "test")]
    pub split: String,

    /// Report path (JSON).
    #[arg(long)]
    pub out: PathBuf,

    /// Checkpoint of a trained network to evaluate.
    #[arg(long, conflicts_with_all = ["method", "pred_dir"])]
    pub model: Option<PathBuf>,

    /// Interpolation or naive baseline to evaluate.
    #[arg(long, value_enum, conflicts_with = "pred_dir")]
    pub method: Option<MethodName>,

    /// Directory of precomputed flood maps mirroring the dataset layout.
    #[arg(long)]
    pub pred_dir: Option<PathBuf>,

    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,

    #[arg(long, default_value_t = 0.25)]
    pub band_lo: f64,

    #[arg(long, default_value_t = 0.85)]
    pub band_hi: f64,

    /// Confidence level for the accuracy interval.
    #[arg(long, default_value_t = 0.99)]
    pub conf: f64,

    #[arg(long, default_value_t = 10)]
    pub factor: usize,

    /// Bicubic sharpness parameter.
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    pub a: f64,

    /// Lanczos lobe count.
    #[arg(long, default_value_t = 3)]
    pub lobes: usize,
}

#[derive(Serialize)]
struct EvalReport {
    model: String,
    n: u64,
    accuracy: f64,
    acc_pi: [f64; 2],
    mcc: f64,
    auc: Option<f64>,
    counts: ConfusionCounts,
}

fn select_predictor(args: &EvaluateArgs) -> Result<Predictor> {
    match (&args.model, &args.method, &args.pred_dir) {
        (Some(path), None, None) => Predictor::from_checkpoint(path),
        (None, Some(name), None) => Predictor::from_method(*name, args.a, args.lobes),
        (None, None, Some(dir)) => Ok(Predictor::from_stored(dir)),
        _ => Err(Error::InvalidConfig(
            "exactly one of --model, --method, --pred-dir must be given".into(),
        )),
    }
}

fn evaluate_split(
    args: &EvaluateArgs,
    manifest: &DatasetManifest,
    base: &Path,
) -> Result<EvalReport> {
    let pred = select_predictor(args)?;
    let split = split_from_str(&args.split)?;
    let band = BandLimits::new(args.band_lo, args.band_hi)?;
    let f = ScaleFactor::new(args.factor)?;
    let pooled = pool_split(&pred, manifest, base, split, band, f, args.theta, true)?;

    let counts = pooled.counts;
    let n = counts.total();
    let acc_pi = clopper_pearson(counts.tp + counts.tn, n, args.conf)?;
    let pooled_auc = match pooled.scored {
        Some((scores, labels)) => {
            let len = scores.len();
            let grid = FractionGrid::new(1, len, scores)?;
            let truth = BinaryGrid::new(1, len, labels.iter().map(|&b| b as u8).collect())?;
            let mask = BinaryGrid::from_fn(1, len, |_, _| true);
            Some(auc(&roc(&grid, &truth, &mask)?))
        }
        None => None,
    };

    Ok(EvalReport {
        model: pred.label().to_string(),
        n,
        accuracy: accuracy(&counts),
        acc_pi: [acc_pi.0, acc_pi.1],
        mcc: mcc(&counts),
        auc: pooled_auc,
        counts,
    })
}

pub fn run(args: EvaluateArgs) -> Result<()> {
    let started = Instant::now();
    let (manifest, base) = open_dataset(&args.data)?;
    let report = evaluate_split(&args, &manifest, &base)?;

    let mut body = serde_json::to_string_pretty(&report)?;
    body.push('\n');
    std::fs::write(&args.out, body)?;
    eprintln!(
        "{}: accuracy {:.4} over {} in-band cells",
        report.model, report.accuracy, report.n
    );

    write_run_manifest(
        "evaluate",
        &args,
        None,
        &[&args.data],
        &[&args.out],
        started,
        &args.out,
    )?;
    Ok(())
}
