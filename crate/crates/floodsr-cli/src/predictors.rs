//! Predictors that the evaluation commands score over dataset splits: a
//! trained checkpoint, an interpolation or naive baseline, or predictions
//! already stored on disk mirroring the dataset layout.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use floodsr::baseline::{baseline_downscale, naive_downscale, KernelSpec};
use floodsr::eval::ConfusionCounts;
use floodsr::net::{forward, Network};
use floodsr::raster::read_binary_grid;
use floodsr::synth::{DatasetManifest, Split, TileRecord};
use floodsr::wfm::{band_mask, threshold_grid, BandLimits, ScaleFactor};
use floodsr::{Error, Fim, Result, Wfm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Naive,
    Bicubic,
    Lanczos,
}

pub enum Predictor {
    Net { label: String, net: Box<Network<f64>> },
    Method { label: String, kernel: Option<KernelSpec> },
    Stored { label: String, dir: PathBuf },
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

impl Predictor {
    pub fn from_checkpoint(path: &Path) -> Result<Self> {
        Ok(Predictor::Net {
            label: stem(path),
            net: Box::new(Network::load(path)?),
        })
    }

    pub fn from_method(name: MethodName, a: f64, lobes: usize) -> Result<Self> {
        let kernel = match name {
            MethodName::Naive => None,
            MethodName::Bicubic => Some(KernelSpec::bicubic(a)?),
            MethodName::Lanczos => Some(KernelSpec::lanczos(lobes)?),
        };
        let label = match name {
            MethodName::Naive => "naive",
            MethodName::Bicubic => "bicubic",
            MethodName::Lanczos => "lanczos",
        };
        Ok(Predictor::Method { label: label.into(), kernel })
    }

    pub fn from_stored(dir: &Path) -> Self {
        Predictor::Stored { label: stem(dir), dir: dir.to_path_buf() }
    }

    pub fn label(&self) -> &str {
        match self {
            Predictor::Net { label, .. }
            | Predictor::Method { label, .. }
            | Predictor::Stored { label, .. } => label,
        }
    }

    /// Probability map, for predictors that produce one.
    pub fn scores(&self, wfm: &Wfm) -> Result<Option<Wfm>> {
        match self {
            Predictor::Net { net, .. } => {
                let (probs, _) = forward(net, wfm)?;
                Ok(Some(probs))
            }
            _ => Ok(None),
        }
    }

    pub fn predict(
        &self,
        rec: &TileRecord,
        wfm: &Wfm,
        f: ScaleFactor,
        theta: f64,
    ) -> Result<Fim> {
        match self {
            Predictor::Net { net, .. } => {
                let (probs, _) = forward(net, wfm)?;
                Ok(threshold_grid(&probs, theta))
            }
            Predictor::Method { kernel: Some(k), .. } => {
                Ok(baseline_downscale(wfm, f, *k, theta))
            }
            Predictor::Method { kernel: None, .. } => Ok(naive_downscale(wfm, f)),
            Predictor::Stored { dir, .. } => read_binary_grid(&dir.join(&rec.fim)),
        }
    }
}

pub fn split_from_str(name: &str) -> Result<Split> {
    match name {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        other => Err(Error::InvalidConfig(format!(
            "split {other:?} is not one of train, val, test"
        ))),
    }
}

pub struct PooledScores {
    pub counts: ConfusionCounts,
    /// In-band (score, truth) pairs in tile order, when the predictor
    /// produces probabilities.
    pub scored: Option<(Vec<f64>, Vec<bool>)>,
}

/// Scores one predictor over every tile of a split, pooling in-band
/// confusion counts and, when available, the raw probabilities for ROC use.
#[allow(clippy::too_many_arguments)]
pub fn pool_split(
    pred: &Predictor,
    manifest: &DatasetManifest,
    base: &Path,
    split: Split,
    band: BandLimits,
    f: ScaleFactor,
    theta: f64,
    want_scores: bool,
) -> Result<PooledScores> {
    let mut counts = ConfusionCounts { tp: 0, tn: 0, fp: 0, fn_: 0 };
    let mut scored: Option<(Vec<f64>, Vec<bool>)> = None;
    let mut seen = false;
    for rec in manifest.tiles_for(split) {
        seen = true;
        let (fim, wfm) = rec.load(base)?;
        let mask = band_mask(&wfm, band, f);
        let hard = pred.predict(rec, &wfm, f, theta)?;
        let c = floodsr::eval::confusion(&hard, &fim, &mask)?;
        counts.tp += c.tp;
        counts.tn += c.tn;
        counts.fp += c.fp;
        counts.fn_ += c.fn_;
        if want_scores {
            if let Some(probs) = pred.scores(&wfm)? {
                let (scores, labels) = scored.get_or_insert_with(Default::default);
                for i in 0..probs.cells().len() {
                    if mask.cells()[i] == 1 {
                        scores.push(probs.cells()[i]);
                        labels.push(fim.cells()[i] == 1);
                    }
                }
            }
        }
    }
    if !seen {
        return Err(Error::EmptyDataset(format!(
            "split {:?} has no tiles",
            split.as_str()
        )));
    }
    Ok(PooledScores { counts, scored })
}
