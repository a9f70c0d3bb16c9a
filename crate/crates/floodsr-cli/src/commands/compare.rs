use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use floodsr::eval::{discordant_counts, holm_bonferroni, mcnemar};
use floodsr::synth::open_dataset;
use floodsr::wfm::{band_mask, BandLimits, ScaleFactor};
use floodsr::{Error, Fim, Result};
use serde::Serialize;

use crate::manifest::write_run_manifest;
use crate::predictors::{split_from_str, MethodName, Predictor};

#[derive(Args, Serialize)]
pub struct CompareArgs {
    /// Dataset directory, or the manifest.json inside one.
    #[arg(long)]
    pub data: PathBuf,

    #[arg(long, default_value = "test")]
    pub split: String,

    /// Comparison report path (JSON).
    #[arg(long)]
    pub out: PathBuf,

    /// Checkpoints to include (repeatable).
    #[arg(long)]
    pub model: Vec<PathBuf>,

    /// Baselines to include (repeatable).
    #[arg(long, value_enum)]
    pub method: Vec<MethodName>,

    /// Family-wise error rate for the Holm correction.
    #[arg(long, default_value_t = 1e-3)]
    pub fwer: f64,

    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,

    #[arg(long, default_value_t = 0.25)]
    pub band_lo: f64,

    #[arg(long, default_value_t = 0.85)]
    pub band_hi: f64,

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
struct PairResult {
    a: String,
    b: String,
    p: f64,
    rejected: bool,
}

#[derive(Serialize)]
struct Comparison {
    fwer: f64,
    pairs: Vec<PairResult>,
}

pub fn run(args: CompareArgs) -> Result<()> {
    let started = Instant::now();
    let mut predictors: Vec<Predictor> = Vec::new();
    for path in &args.model {
        predictors.push(Predictor::from_checkpoint(path)?);
    }
    for name in &args.method {
        predictors.push(Predictor::from_method(*name, args.a, args.lobes)?);
    }
    if predictors.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "comparison needs at least two predictors, got {}",
            predictors.len()
        )));
    }

    let (manifest, base) = open_dataset(&args.data)?;
    let split = split_from_str(&args.split)?;
    let band = BandLimits::new(args.band_lo, args.band_hi)?;
    let f = ScaleFactor::new(args.factor)?;

    // Discordant pairs pool across tiles so each McNemar test sees the
    // whole split as one paired sample.
    let n_pairs = predictors.len() * (predictors.len() - 1) / 2;
    let mut pooled = vec![(0u64, 0u64); n_pairs];
    let mut seen = false;
    for rec in manifest.tiles_for(split) {
        seen = true;
        let (fim, wfm) = rec.load(&base)?;
        let mask = band_mask(&wfm, band, f);
        let preds: Vec<Fim> = predictors
            .iter()
            .map(|p| p.predict(rec, &wfm, f, args.theta))
            .collect::<Result<_>>()?;
        let mut k = 0;
        for i in 0..preds.len() {
            for j in i + 1..preds.len() {
                match discordant_counts(&preds[i], &preds[j], &fim, &mask) {
                    Ok((b, c)) => {
                        pooled[k].0 += b;
                        pooled[k].1 += c;
                    }
                    // A tile whose band misses every cell contributes no
                    // discordant pairs; the pooled counts still stand.
                    Err(Error::EmptyMask) => {}
                    Err(e) => return Err(e),
                }
                k += 1;
            }
        }
    }
    if !seen {
        return Err(Error::EmptyDataset(format!("split {:?} has no tiles", args.split)));
    }

    let p_values: Vec<f64> = pooled.iter().map(|&(b, c)| mcnemar(b, c)).collect();
    let rejected = holm_bonferroni(&p_values, args.fwer)?;

    let mut pairs = Vec::with_capacity(n_pairs);
    let mut k = 0;
    for i in 0..predictors.len() {
        for j in i + 1..predictors.len() {
            pairs.push(PairResult {
                a: predictors[i].label().to_string(),
                b: predictors[j].label().to_string(),
                p: p_values[k],
                rejected: rejected[k],
            });
            k += 1;
        }
    }

    let report = Comparison { fwer: args.fwer, pairs };
    let mut body = serde_json::to_string_pretty(&report)?;
    body.push('\n');
    std::fs::write(&args.out, body)?;
    for pair in &report.pairs {
        eprintln!(
            "{} vs {}: p = {:.3e}{}",
            pair.a,
            pair.b,
            pair.p,
            if pair.rejected { " (rejected)" } else { "" }
        );
    }

    let inputs: Vec<&std::path::Path> = std::iter::once(args.data.as_path())
        .chain(args.model.iter().map(|p| p.as_path()))
        .collect();
    write_run_manifest("compare", &args, None, &inputs, &[&args.out], started, &args.out)?;
    Ok(())
}
