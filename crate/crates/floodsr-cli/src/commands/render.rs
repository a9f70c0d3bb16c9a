use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use floodsr::raster::{read_binary_grid, read_fraction_grid, write_gray_pgm, BinaryGrid};
use floodsr::{Error, Result};
use serde::Serialize;

use crate::manifest::write_run_manifest;

/// Gray levels of the difference map, darkest for agreement on dry and
/// brightest for agreement on wet, with both error kinds in between.
const LEVEL_TN: u8 = 0;
const LEVEL_FN: u8 = 100;
const LEVEL_FP: u8 = 170;
const LEVEL_TP: u8 = 255;

#[derive(Args, Serialize)]
pub struct RenderArgs {
    /// Grid to render: a flood map (.pgm) or a fraction grid (.wfg).
    #[arg(long = "in")]
    pub input: PathBuf,

    /// Output grayscale image (.pgm).
    #[arg(long)]
    pub out: PathBuf,

    /// Reference flood map; renders prediction vs truth as a difference map.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

fn render_binary(grid: &BinaryGrid) -> Vec<u8> {
    grid.cells().iter().map(|&v| if v == 1 { 255 } else { 0 }).collect()
}

fn render_difference(pred: &BinaryGrid, truth: &BinaryGrid) -> Result<Vec<u8>> {
    if pred.rows() != truth.rows() || pred.cols() != truth.cols() {
        return Err(Error::ShapeMismatch(format!(
            "prediction {}x{} vs truth {}x{}",
            pred.rows(),
            pred.cols(),
            truth.rows(),
            truth.cols()
        )));
    }
    Ok(pred
        .cells()
        .iter()
        .zip(truth.cells())
        .map(|(&p, &t)| match (p, t) {
            (0, 0) => LEVEL_TN,
            (0, _) => LEVEL_FN,
            (_, 0) => LEVEL_FP,
            _ => LEVEL_TP,
        })
        .collect())
}

/// Fractions already in [0, 1] map straight onto the gray ramp; anything
/// else (a DEM, say) is min-max normalised, with a flat field going black.
fn render_fractions(cells: &[f64]) -> Vec<u8> {
    let lo = cells.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = cells.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (offset, scale) = if lo >= 0.0 && hi <= 1.0 {
        (0.0, 255.0)
    } else if hi > lo {
        (lo, 255.0 / (hi - lo))
    } else {
        (lo, 0.0)
    };
    cells
        .iter()
        .map(|&v| ((v - offset) * scale).round().clamp(0.0, 255.0) as u8)
        .collect()
}

pub fn run(args: RenderArgs) -> Result<()> {
    let started = Instant::now();
    let ext = args
        .input
        .extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default();

    let (rows, cols, bytes) = match ext.as_str() {
        "pgm" => {
            let grid = read_binary_grid(&args.input)?;
            let bytes = match &args.truth {
                Some(path) => render_difference(&grid, &read_binary_grid(path)?)?,
                None => render_binary(&grid),
            };
            (grid.rows(), grid.cols(), bytes)
        }
        "wfg" => {
            if args.truth.is_some() {
                return Err(Error::InvalidConfig(
                    "difference maps need a binary prediction, not a fraction grid".into(),
                ));
            }
            let grid = read_fraction_grid::<f64>(&args.input)?;
            let bytes = render_fractions(grid.cells());
            (grid.rows(), grid.cols(), bytes)
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "cannot render {other:?} files, expected .pgm or .wfg"
            )))
        }
    };

    write_gray_pgm(&args.out, rows, cols, &bytes)?;

    let mut inputs = vec![args.input.as_path()];
    if let Some(t) = &args.truth {
        inputs.push(t.as_path());
    }
    write_run_manifest("render", &args, None, &inputs, &[&args.out], started, &args.out)?;
    Ok(())
}
