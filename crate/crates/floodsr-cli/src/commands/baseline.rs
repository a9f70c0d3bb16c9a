use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use floodsr::raster::{read_fraction_grid, write_binary_grid};
use floodsr::wfm::ScaleFactor;
use floodsr::Result;
use serde::Serialize;

use crate::manifest::write_run_manifest;
use crate::predictors::{MethodName, Predictor};

#[derive(Args, Serialize)]
pub struct BaselineArgs {
    /// Input water-fraction grid (.wfg).
    #[arg(long)]
    pub wfm: PathBuf,

    /// Output binary flood map (.pgm).
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, value_enum)]
    pub method: MethodName,

    /// Wet/dry decision threshold (ignored by the naive method).
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,

    /// Upscaling factor.
    #[arg(long, default_value_t = 10)]
    pub factor: usize,

    /// Bicubic sharpness parameter.
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    pub a: f64,

    /// Lanczos lobe count.
    #[arg(long, default_value_t = 3)]
    pub lobes: usize,
}

pub fn run(args: BaselineArgs) -> Result<()> {
    let started = Instant::now();
    let wfm = read_fraction_grid(&args.wfm)?;
    let f = ScaleFactor::new(args.factor)?;
    let pred = Predictor::from_method(args.method, args.a, args.lobes)?;
    // Baselines never consult the tile record; a placeholder satisfies the
    // shared predictor interface.
    let rec = floodsr::synth::TileRecord {
        fim: String::new(),
        wfm: String::new(),
        stage: 0.0,
        row0: 0,
        col0: 0,
        split: String::new(),
    };
    let fim = pred.predict(&rec, &wfm, f, args.theta)?;
    write_binary_grid(&fim, &args.out)?;

    write_run_manifest(
        "baseline",
        &args,
        None,
        &[&args.wfm],
        &[&args.out],
        started,
        &args.out,
    )?;
    Ok(())
}
