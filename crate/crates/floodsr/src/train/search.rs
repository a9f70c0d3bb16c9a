//! Seeded random hyperparameter search over the published ranges.
//!
//! Continuous knobs (eta, initial learning rate) are drawn uniformly;
//! architectural knobs come from evenly spaced lattices. Every trial trains
//! from scratch under the same seed and data, and the winner is the trial
//! with the lowest best-epoch validation total.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::net::NetConfig;
use crate::scalar::Scalar;
use crate::synth::DatasetManifest;
use crate::{Error, Result};

use super::{train, TrainConfig};

/// Evenly spaced integer grid lo, lo+step, ..., hi.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    pub lo: usize,
    pub hi: usize,
    pub step: usize,
}

impl Lattice {
    pub const fn new(lo: usize, hi: usize, step: usize) -> Self {
        Self { lo, hi, step }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if self.lo == 0 || self.step == 0 || self.hi < self.lo || (self.hi - self.lo) % self.step != 0
        {
            return Err(Error::InvalidConfig(format!(
                "{what} lattice {}..{} step {} is malformed",
                self.lo, self.hi, self.step
            )));
        }
        Ok(())
    }

    fn within(&self, bounds: Lattice, what: &str) -> Result<()> {
        self.validate(what)?;
        if self.lo < bounds.lo || self.hi > bounds.hi {
            return Err(Error::InvalidConfig(format!(
                "{what} lattice {}..{} leaves the searchable range {}..{}",
                self.lo, self.hi, bounds.lo, bounds.hi
            )));
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        (self.hi - self.lo) / self.step + 1
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        self.lo + self.step * rng.gen_range(0..self.count())
    }
}

/// Published search ranges the space must stay inside.
pub const ETA_BOUNDS: (f64, f64) = (0.0, 2000.0);
pub const LR0_BOUNDS: (f64, f64) = (1e-5, 1e-4);
pub const BLOCKS_BOUNDS: Lattice = Lattice::new(2, 16, 2);
pub const LAYERS_BOUNDS: Lattice = Lattice::new(2, 32, 2);
pub const FEATURES_BOUNDS: Lattice = Lattice::new(8, 64, 8);
pub const GROWTH_BOUNDS: Lattice = Lattice::new(8, 64, 8);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub eta: (f64, f64),
    pub lr0: (f64, f64),
    pub blocks: Lattice,
    pub layers_per_block: Lattice,
    pub features: Lattice,
    pub growth: Lattice,
    pub budget: usize,
    pub seed: u64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            eta: ETA_BOUNDS,
            lr0: LR0_BOUNDS,
            blocks: BLOCKS_BOUNDS,
            layers_per_block: LAYERS_BOUNDS,
            features: FEATURES_BOUNDS,
            growth: GROWTH_BOUNDS,
            budget: 8,
            seed: 7,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::EmptyBudget);
        }
        for (what, range, bounds) in [
            ("eta", self.eta, ETA_BOUNDS),
            ("lr0", self.lr0, LR0_BOUNDS),
        ] {
            if !range.0.is_finite() || !range.1.is_finite() || range.0 > range.1 {
                return Err(Error::InvalidConfig(format!(
                    "{what} range ({}, {}) is malformed",
                    range.0, range.1
                )));
            }
            if range.0 < bounds.0 || range.1 > bounds.1 {
                return Err(Error::InvalidConfig(format!(
                    "{what} range ({}, {}) leaves the searchable range ({}, {})",
                    range.0, range.1, bounds.0, bounds.1
                )));
            }
        }
        self.blocks.within(BLOCKS_BOUNDS, "blocks")?;
        self.layers_per_block.within(LAYERS_BOUNDS, "layers_per_block")?;
        self.features.within(FEATURES_BOUNDS, "features")?;
        self.growth.within(GROWTH_BOUNDS, "growth")?;
        Ok(())
    }
}

/// One sampled configuration and its score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub eta: f64,
    pub lr0: f64,
    pub blocks: usize,
    pub layers_per_block: usize,
    pub features: usize,
    pub growth: usize,
    /// Best-epoch validation total of the trial's training run.
    pub val_total: f64,
}

pub const TRIAL_TABLE_HEADER: &str =
    "trial,eta,lr0,blocks,layers_per_block,features,growth,val_total";

pub fn write_trial_table(path: &Path, trials: &[TrialRecord]) -> Result<()> {
    let mut out = String::from(TRIAL_TABLE_HEADER);
    out.push('\n');
    for t in trials {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            t.trial, t.eta, t.lr0, t.blocks, t.layers_per_block, t.features, t.growth, t.val_total
        ));
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// The winning configurations plus the complete trial table.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best_trial: usize,
    pub net_config: NetConfig,
    pub train_config: TrainConfig,
    pub trials: Vec<TrialRecord>,
}

/// Draw order is fixed (eta, lr0, blocks, layers, features, growth) so a
/// seed pins the whole trial sequence.
fn sample_trial(space: &SearchSpace, rng: &mut ChaCha8Rng) -> (f64, f64, usize, usize, usize, usize) {
    let eta = rng.gen_range(space.eta.0..=space.eta.1);
    let lr0 = rng.gen_range(space.lr0.0..=space.lr0.1);
    let blocks = space.blocks.sample(rng);
    let layers = space.layers_per_block.sample(rng);
    let features = space.features.sample(rng);
    let growth = space.growth.sample(rng);
    (eta, lr0, blocks, layers, features, growth)
}

/// Runs `space.budget` independent trainings of `epochs_per_trial` epochs
/// each, writing per-trial checkpoints into `work_dir`, and returns the
/// configuration with the lowest validation total. Structural knobs that are
/// not searched (scale, kernel, attention, upsampling plan, optimizer
/// betas, decay, batch, seed) come from the two templates.
pub fn random_search<T: Scalar>(
    space: &SearchSpace,
    manifest: &DatasetManifest,
    base: &Path,
    net_template: &NetConfig,
    train_template: &TrainConfig,
    epochs_per_trial: usize,
    work_dir: &Path,
) -> Result<SearchOutcome> {
    space.validate()?;
    fs::create_dir_all(work_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(space.seed);

    let mut trials = Vec::with_capacity(space.budget);
    let mut best: Option<(usize, NetConfig, TrainConfig, f64)> = None;
    for trial in 0..space.budget {
        let (eta, lr0, blocks, layers, features, growth) = sample_trial(space, &mut rng);
        let net_cfg = NetConfig {
            base_features: features,
            blocks,
            layers_per_block: layers,
            growth,
            ..net_template.clone()
        };
        let tc = TrainConfig {
            eta,
            lr0,
            epochs: epochs_per_trial,
            ..*train_template
        };
        let ckpt = work_dir.join(format!("trial_{trial:03}.ckpt"));
        let outcome = train::<T>(manifest, base, &net_cfg, &tc, &ckpt)?;
        let val_total = outcome.log[outcome.best_epoch].val_total;
        trials.push(TrialRecord {
            trial,
            eta,
            lr0,
            blocks,
            layers_per_block: layers,
            features,
            growth,
            val_total,
        });
        if best.as_ref().map_or(true, |(_, _, _, b)| val_total < *b) {
            best = Some((trial, net_cfg, tc, val_total));
        }
    }

    let (best_trial, net_config, train_config, _) = best.expect("budget is at least one");
    Ok(SearchOutcome {
        best_trial,
        net_config,
        train_config,
        trials,
    })
}
