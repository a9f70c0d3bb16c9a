use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use floodsr::net::{forward, Network};
use floodsr::raster::{read_fraction_grid, write_binary_grid, write_fraction_grid};
use floodsr::wfm::threshold_grid;
use floodsr::Result;
use serde::Serialize;

use crate::manifest::write_run_manifest;

#[derive(Args, Serialize)]
pub struct DownscaleArgs {
    /// Trained checkpoint.
    #[arg(long)]
    pub model: PathBuf,

    /// Input water-fraction grid (.wfg).
    #[arg(long)]
    pub wfm: PathBuf,

    /// Output binary flood map (.pgm).
    #[arg(long)]
    pub out: PathBuf,

    /// Also write the raw probability map.
    #[arg(long)]
    pub prob: Option<PathBuf>,

    /// Wet/dry decision threshold.
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
}

pub fn run(args: DownscaleArgs) -> Result<()> {
    let started = Instant::now();
    let net: Network<f64> = Network::load(&args.model)?;
    let wfm = read_fraction_grid(&args.wfm)?;
    let (probs, _) = forward(&net, &wfm)?;
    let fim = threshold_grid(&probs, args.theta);
    write_binary_grid(&fim, &args.out)?;

    let mut outputs = vec![args.out.clone()];
    if let Some(prob_path) = &args.prob {
        write_fraction_grid(&probs, prob_path)?;
        outputs.push(prob_path.clone());
    }

    let out_refs: Vec<&std::path::Path> = outputs.iter().map(PathBuf::as_path).collect();
    write_run_manifest(
        "downscale",
        &args,
        None,
        &[&args.model, &args.wfm],
        &out_refs,
        started,
        &args.out,
    )?;
    Ok(())
}
