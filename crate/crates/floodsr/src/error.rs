//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong across the pipeline.
///
/// Variants are shared by all modules so callers can match once; the CLI
/// maps every variant onto its data-error exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed header: {0}")]
    MalformedHeader(String),

    /// A PGM payload byte outside {0, 255}. `index` is the cell index.
    #[error("illegal pixel value {value} at cell {index}")]
    IllegalPixel { value: u8, index: usize },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("non-finite value at cell {0}")]
    NonFiniteValue(usize),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("grid {rows}x{cols} is not divisible into {tile_rows}x{tile_cols} tiles")]
    IndivisibleDimensions {
        rows: usize,
        cols: usize,
        tile_rows: usize,
        tile_cols: usize,
    },

    #[error("terrain size {0} is not 2^n + 1 with n >= 5")]
    BadSize(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("zero denominator at cell {0}")]
    ZeroDenominator(usize),

    #[error("channel count {channels} is not divisible by {divisor}")]
    ChannelIndivisible { channels: usize, divisor: usize },

    #[error("non-finite activation in {0}")]
    NonFiniteActivation(&'static str),

    #[error("training diverged: non-finite loss at epoch {0}")]
    DivergedLoss(usize),

    #[error("search budget is zero")]
    EmptyBudget,

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("evaluation mask is empty")]
    EmptyMask,

    #[error("masked pixels contain a single class; ROC curve is degenerate")]
    SingleClassMask,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
