//! Synthetic flood scenes: fractal terrain, carved river channels, bathtub
//! inundation, and reproducible dataset assembly.

pub mod dataset;
pub mod flood;
pub mod terrain;

pub use dataset::{
    build_dataset, config_hash, open_dataset, DatasetManifest, FloodScenario, Split,
    SplitFractions, TileRecord, DEFAULT_MIN_BAND_PIXELS, TILE_SIZE,
};
pub use flood::inundate;
pub use terrain::{carve_channel, generate_dem, TerrainConfig};
