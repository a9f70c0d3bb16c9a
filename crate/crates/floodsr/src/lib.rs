//! Downscaling coarse water-fraction rasters into fine binary flood
//! inundation maps.
//!
//! A water fraction map (WFM) stores, per coarse cell, the fraction of its
//! f×f high-resolution children that are inundated. A flood inundation map
//! (FIM) is the binary high-resolution raster itself. This crate covers the
//! full study loop for learning that inverse mapping at scale factor f = 10:
//!
//! * [`raster`] — bit-exact grid formats (P5 PGM for FIMs, WFG1 for
//!   fraction grids) and tiling.
//! * [`synth`] — a procedural terrain + bathtub-flood simulator that emits
//!   paired FIM/WFM training tiles with exactly consistent fractions.
//! * [`wfm`] — fraction algebra: patch aggregation, the evaluation band
//!   mask, thresholding, and the SWI water index.
//! * [`baseline`] — bicubic/Lanczos interpolation baselines and the
//!   all-dry predictor.
//! * [`net`] — a residual dense network with sub-pixel upsampling and
//!   optional channel attention, forward and reverse passes written by hand.
//! * [`train`] — penalized cross-entropy loss, Adam, the training loop,
//!   and seeded random hyperparameter search.
//! * [`eval`] — masked confusion statistics, MCC, ROC/AUC, Clopper-Pearson
//!   intervals, McNemar tests, and Holm-Bonferroni correction.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the shipped precision to `f64`.

pub mod baseline;
pub mod error;
pub mod eval;
pub mod net;
pub mod raster;
pub mod scalar;
pub mod synth;
pub mod train;
pub mod wfm;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Shipped scalar precision for grid math, network parameters, and losses.
pub type Real = f64;

/// Binary flood inundation map; cell 1 = inundated.
pub type Fim = raster::BinaryGrid;

/// Coarse water fraction map at shipped precision.
pub type Wfm = raster::FractionGrid<Real>;

/// Per-pixel inundation probability map at shipped precision.
pub type ProbMap = raster::FractionGrid<Real>;

/// Elevation field at shipped precision, normalized units.
pub type Dem = raster::ElevationGrid<Real>;
