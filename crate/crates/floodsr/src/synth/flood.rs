//! Bathtub inundation: flood fill outward from the channel at a fixed
//! waterline.

use std::collections::VecDeque;

use crate::raster::{BinaryGrid, ElevationGrid};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Floods every cell that is at or below the waterline and connected to the
/// channel through such cells (4-connectivity).
///
/// The waterline is the minimum elevation over channel cells plus `stage`,
/// so stage 0 wets at least the lowest channel cell and the wet set grows
/// monotonically with stage. Depressions below the waterline but cut off by
/// higher ground stay dry.
pub fn inundate<T: Scalar>(
    dem: &ElevationGrid<T>,
    channel: &BinaryGrid,
    stage: T,
) -> Result<BinaryGrid> {
    if dem.rows() != channel.rows() || dem.cols() != channel.cols() {
        return Err(Error::ShapeMismatch(format!(
            "dem {}x{} vs channel mask {}x{}",
            dem.rows(),
            dem.cols(),
            channel.rows(),
            channel.cols()
        )));
    }
    if stage < T::zero() || !stage.is_finite() {
        return Err(Error::InvalidConfig(format!("stage {stage} must be finite and >= 0")));
    }
    let (rows, cols) = (dem.rows(), dem.cols());

    let mut channel_min = T::infinity();
    for r in 0..rows {
        for c in 0..cols {
            if channel.get(r, c) == 1 {
                channel_min = channel_min.min(dem.get(r, c));
            }
        }
    }
    if channel_min == T::infinity() {
        return Err(Error::EmptyMask);
    }
    let waterline = channel_min + stage;

    let mut wet = BinaryGrid::zeros(rows, cols);
    let mut queue = VecDeque::new();
    for r in 0..rows {
        for c in 0..cols {
            if channel.get(r, c) == 1 && dem.get(r, c) <= waterline {
                wet.set(r, c, 1);
                queue.push_back((r, c));
            }
        }
    }
    while let Some((r, c)) = queue.pop_front() {
        let neighbors = [
            (r.wrapping_sub(1), c),
            (r + 1, c),
            (r, c.wrapping_sub(1)),
            (r, c + 1),
        ];
        for (nr, nc) in neighbors {
            if nr < rows && nc < cols && wet.get(nr, nc) == 0 && dem.get(nr, nc) <= waterline {
                wet.set(nr, nc, 1);
                queue.push_back((nr, nc));
            }
        }
    }
    Ok(wet)
}
