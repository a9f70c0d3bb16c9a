//! Dataset assembly: tile inundation maps, aggregate the paired water
//! fractions, and persist everything behind a reproducible manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::raster::{read_binary_grid, read_fraction_grid, write_binary_grid, write_fraction_grid};
use crate::synth::flood::inundate;
use crate::synth::terrain::{carve_channel, generate_dem, TerrainConfig};
use crate::wfm::{aggregate, BandLimits, ScaleFactor};
use crate::{Error, Fim, Result, Wfm};

/// Edge length of one training tile, in fine-grid cells.
pub const TILE_SIZE: usize = 100;

/// Water stages to simulate, each producing one inundation map per terrain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloodScenario {
    stages: Vec<f64>,
}

impl FloodScenario {
    /// Stages must be finite, non-negative, and strictly increasing.
    pub fn new(stages: Vec<f64>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidConfig("scenario needs at least one stage".into()));
        }
        for w in stages.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidConfig(format!(
                    "stages must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if !stages[0].is_finite() || stages[0] < 0.0 || !stages[stages.len() - 1].is_finite() {
            return Err(Error::InvalidConfig("stages must be finite and >= 0".into()));
        }
        Ok(Self { stages })
    }

    pub fn stages(&self) -> &[f64] {
        &self.stages
    }

    /// Twelve stages spanning shallow overbank flow to valley-filling
    /// floods; the upper stages contribute most of the shoreline tiles.
    pub fn default_stages() -> Self {
        Self {
            stages: (1..=12).map(|i| 0.045 * i as f64).collect(),
        }
    }
}

/// Default minimum count of partially wet coarse cells for a tile to enter
/// the dataset.
pub const DEFAULT_MIN_BAND_PIXELS: usize = 10;

/// Train/val/test proportions; must be non-negative and sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitFractions {
    pub const DEFAULT: Self = Self {
        train: 0.7,
        val: 0.15,
        test: 0.15,
    };

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidConfig("split fractions must lie in [0, 1]".into()));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("split fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// One stored FIM/WFM pair. Paths are relative to the manifest directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileRecord {
    pub fim: String,
    pub wfm: String,
    pub stage: f64,
    pub row0: usize,
    pub col0: usize,
    pub split: String,
}

impl TileRecord {
    pub fn load(&self, base: &Path) -> Result<(Fim, Wfm)> {
        let fim = read_binary_grid(&base.join(&self.fim))?;
        let wfm = read_fraction_grid(&base.join(&self.wfm))?;
        Ok((fim, wfm))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub config_hash: String,
    pub tiles: Vec<TileRecord>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn tiles_for(&self, split: Split) -> impl Iterator<Item = &TileRecord> {
        self.tiles.iter().filter(move |t| t.split == split.as_str())
    }
}

/// SHA-256 over the serialized generation parameters, so a manifest can be
/// matched to the exact configuration that produced it.
pub fn config_hash(
    terrain: &TerrainConfig,
    scenario: &FloodScenario,
    split: &SplitFractions,
    min_band_pixels: usize,
) -> Result<String> {
    #[derive(Serialize)]
    struct Key<'a> {
        terrain: &'a TerrainConfig,
        scenario: &'a FloodScenario,
        split: &'a SplitFractions,
        min_band_pixels: usize,
    }
    let json = serde_json::to_string(&Key {
        terrain,
        scenario,
        split,
        min_band_pixels,
    })?;
    let digest = Sha256::digest(json.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Generates terrain, simulates every stage, tiles the results, keeps tiles
/// whose water-fraction map has at least `min_band_pixels` cells strictly
/// inside the partial-wetting band, and writes the pairs plus a manifest
/// into `out_dir`.
///
/// A tile's split is a pure hash of its origin and the seed, so the same
/// footprint lands in the same split at every stage and no location leaks
/// between train and evaluation data.
pub fn build_dataset(
    terrain: &TerrainConfig,
    scenario: &FloodScenario,
    out_dir: &Path,
    split: SplitFractions,
    min_band_pixels: usize,
) -> Result<DatasetManifest> {
    split.validate()?;
    let factor = ScaleFactor::DEFAULT;
    let band = BandLimits::DEFAULT;

    let dem = generate_dem::<f64>(terrain)?;
    let (carved, channel) = carve_channel(&dem, terrain)?;
    let usable = (terrain.size / TILE_SIZE) * TILE_SIZE;
    if usable == 0 {
        return Err(Error::EmptyDataset(format!(
            "terrain of size {} holds no {TILE_SIZE}x{TILE_SIZE} tile",
            terrain.size
        )));
    }
    let carved = carved.crop(usable, usable)?;
    let channel = channel.crop(usable, usable)?;

    let tile_dir = out_dir.join("tiles");
    fs::create_dir_all(&tile_dir)?;

    let mut records = Vec::new();
    for (stage_index, &stage) in scenario.stages().iter().enumerate() {
        let fim_full = inundate(&carved, &channel, stage)?;
        for tile in fim_full.tile(TILE_SIZE, TILE_SIZE)? {
            let wfm = aggregate::<f64>(&tile.grid, factor)?;
            let in_band = wfm.cells().iter().filter(|&&v| band.contains(v)).count();
            if in_band < min_band_pixels {
                continue;
            }
            let stem = format!(
                "s{stage_index:02}_r{row0:05}_c{col0:05}",
                row0 = tile.row0,
                col0 = tile.col0
            );
            let fim_rel = format!("tiles/fim_{stem}.pgm");
            let wfm_rel = format!("tiles/wfm_{stem}.wfg");
            write_binary_grid(&tile.grid, &out_dir.join(&fim_rel))?;
            write_fraction_grid(&wfm, &out_dir.join(&wfm_rel))?;
            records.push(TileRecord {
                fim: fim_rel,
                wfm: wfm_rel,
                stage,
                row0: tile.row0,
                col0: tile.col0,
                split: assign_split(tile.row0, tile.col0, terrain.seed, split).as_str().into(),
            });
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset(
            "no tile cleared the partial-wetting threshold".into(),
        ));
    }

    let manifest = DatasetManifest {
        seed: terrain.seed,
        config_hash: config_hash(terrain, scenario, &split, min_band_pixels)?,
        tiles: records,
    };
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Deterministic split assignment from the tile origin alone.
fn assign_split(row0: usize, col0: usize, seed: u64, split: SplitFractions) -> Split {
    let key = seed
        ^ (row0 as u64).wrapping_mul(0xA076_1D64_78BD_642F)
        ^ (col0 as u64).wrapping_mul(0xE703_7ED1_A0B4_28DB);
    let h = splitmix64(key);
    // Top 53 bits give a uniform draw in [0, 1).
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    if u < split.train {
        Split::Train
    } else if u < split.train + split.val {
        Split::Val
    } else {
        Split::Test
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Convenience wrapper returning an existing manifest together with its
/// directory, which anchors the relative tile paths.
/// Accepts either the dataset directory or the manifest.json inside it.
pub fn open_dataset(path: &Path) -> Result<(DatasetManifest, PathBuf)> {
    let manifest_path = if path.is_dir() {
        path.join("manifest.json")
    } else {
        path.to_path_buf()
    };
    let manifest = DatasetManifest::load(&manifest_path)?;
    let base = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((manifest, base))
}
