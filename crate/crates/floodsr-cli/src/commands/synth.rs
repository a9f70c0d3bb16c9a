use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use floodsr::raster::write_fraction_grid;
use floodsr::synth::{
    build_dataset, carve_channel, generate_dem, FloodScenario, SplitFractions, TerrainConfig,
    DEFAULT_MIN_BAND_PIXELS,
};
use floodsr::raster::FractionGrid;
use floodsr::Result;
use serde::Serialize;

use crate::manifest::write_run_manifest;

#[derive(Args, Serialize)]
pub struct SynthArgs {
    /// Output directory; receives tiles/, manifest.json, and run.json.
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, default_value_t = TerrainConfig::DEFAULT.seed)]
    pub seed: u64,

    /// Terrain edge length in fine cells; must be 2^n + 1.
    #[arg(long, default_value_t = TerrainConfig::DEFAULT.size)]
    pub size: usize,

    #[arg(long, default_value_t = TerrainConfig::DEFAULT.roughness)]
    pub roughness: f64,

    #[arg(long, default_value_t = TerrainConfig::DEFAULT.channel_count)]
    pub channels: usize,

    #[arg(long, default_value_t = TerrainConfig::DEFAULT.channel_depth)]
    pub depth: f64,

    #[arg(long, default_value_t = TerrainConfig::DEFAULT.channel_width)]
    pub width: f64,

    /// Flood stages as a comma-separated list of waterline offsets;
    /// defaults to twelve evenly spaced stages.
    #[arg(long, value_delimiter = ',')]
    pub stages: Vec<f64>,

    #[arg(long, default_value_t = SplitFractions::DEFAULT.train)]
    pub train_frac: f64,

    #[arg(long, default_value_t = SplitFractions::DEFAULT.val)]
    pub val_frac: f64,

    #[arg(long, default_value_t = SplitFractions::DEFAULT.test)]
    pub test_frac: f64,

    /// Minimum count of partially wet coarse cells for a tile to qualify.
    #[arg(long, default_value_t = DEFAULT_MIN_BAND_PIXELS)]
    pub min_band_pixels: usize,

    /// Also write the carved elevation grid for rendering.
    #[arg(long)]
    pub dem: Option<PathBuf>,
}

pub fn run(args: SynthArgs) -> Result<()> {
    let started = Instant::now();
    let terrain = TerrainConfig {
        seed: args.seed,
        size: args.size,
        roughness: args.roughness,
        channel_count: args.channels,
        channel_depth: args.depth,
        channel_width: args.width,
    };
    let scenario = if args.stages.is_empty() {
        FloodScenario::default_stages()
    } else {
        FloodScenario::new(args.stages.clone())?
    };
    let split = SplitFractions {
        train: args.train_frac,
        val: args.val_frac,
        test: args.test_frac,
    };

    std::fs::create_dir_all(&args.out)?;
    let manifest = build_dataset(&terrain, &scenario, &args.out, split, args.min_band_pixels)?;

    let mut outputs = vec![args.out.join("manifest.json")];
    if let Some(dem_path) = &args.dem {
        let dem = generate_dem::<f64>(&terrain)?;
        let (carved, _) = carve_channel(&dem, &terrain)?;
        let grid = FractionGrid::new(carved.rows(), carved.cols(), carved.cells().to_vec())?;
        write_fraction_grid(&grid, dem_path)?;
        outputs.push(dem_path.clone());
    }

    let out_refs: Vec<&std::path::Path> = outputs.iter().map(PathBuf::as_path).collect();
    write_run_manifest(
        "synth",
        &args,
        Some(args.seed),
        &[],
        &out_refs,
        started,
        &args.out,
    )?;
    eprintln!(
        "synth: {} tiles ({} train) in {}",
        manifest.tiles.len(),
        manifest
            .tiles_for(floodsr::synth::Split::Train)
            .count(),
        args.out.display()
    );
    Ok(())
}
