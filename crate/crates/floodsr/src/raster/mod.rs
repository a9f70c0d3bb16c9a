//! Grid types and bit-exact raster I/O.
//!
//! Three row-major grid types with origin at top-left; index order is
//! (row, col) everywhere. FIMs are stored as P5 PGM ([`pgm`]), fraction and
//! elevation grids in the WFG1 format ([`wfg`]). No georeferencing: the
//! evaluation only ever uses pixel geometry.

mod pgm;
mod wfg;

pub use pgm::{read_binary_grid, write_binary_grid, write_gray_pgm};
pub use wfg::{read_fraction_grid, write_fraction_grid};

use crate::scalar::Scalar;
use crate::{Error, Result};

/// Binary raster; every cell is 0 or 1 (1 = inundated for FIMs).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryGrid {
    rows: usize,
    cols: usize,
    cells: Vec<u8>,
}

impl BinaryGrid {
    /// Builds a grid from row-major cells, rejecting values outside {0,1}.
    pub fn new(rows: usize, cols: usize, cells: Vec<u8>) -> Result<Self> {
        check_len(rows, cols, cells.len())?;
        if let Some(index) = cells.iter().position(|&v| v > 1) {
            return Err(Error::IllegalPixel {
                value: cells[index],
                index,
            });
        }
        Ok(Self { rows, cols, cells })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cells: vec![0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut cells = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                cells.push(f(r, c) as u8);
            }
        }
        Self { rows, cols, cells }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }
    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.cells[r * self.cols + c]
    }
    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u8) {
        debug_assert!(v <= 1);
        self.cells[r * self.cols + c] = v;
    }
    pub fn cells(&self) -> &[u8] {
        &self.cells
    }
    pub fn count_ones(&self) -> usize {
        self.cells.iter().filter(|&&v| v == 1).count()
    }

    /// Top-left `rows`×`cols` corner, for trimming to a tileable size.
    pub fn crop(&self, rows: usize, cols: usize) -> Result<Self> {
        if rows > self.rows || cols > self.cols {
            return Err(Error::ShapeMismatch(format!(
                "crop {rows}x{cols} exceeds grid {}x{}",
                self.rows, self.cols
            )));
        }
        let mut cells = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let start = r * self.cols;
            cells.extend_from_slice(&self.cells[start..start + cols]);
        }
        Ok(Self { rows, cols, cells })
    }

    /// Non-overlapping row-major tiling into `tile_rows`×`tile_cols` pieces.
    pub fn tile(&self, tile_rows: usize, tile_cols: usize) -> Result<Vec<Tile<Self>>> {
        tile_generic(self.rows, self.cols, &self.cells, tile_rows, tile_cols, |tr, tc, v| Self {
            rows: tr,
            cols: tc,
            cells: v,
        })
    }

    /// Reassembles tiles produced by [`BinaryGrid::tile`]. Inverse of tiling.
    pub fn stitch(rows: usize, cols: usize, tiles: &[Tile<Self>]) -> Result<Self> {
        fn parts(g: &BinaryGrid) -> (usize, usize, &[u8]) {
            (g.rows, g.cols, &g.cells)
        }
        let cells = stitch_generic(rows, cols, tiles, parts, 0u8)?;
        Ok(Self { rows, cols, cells })
    }
}

/// Real-valued raster for water fractions, probabilities, spectral bands,
/// and index outputs. Cells must be finite; the [0,1] range is a contextual
/// invariant of WFMs and probability maps, not of the container (the SWI
/// index, for instance, is unbounded).
#[derive(Debug, Clone, PartialEq)]
pub struct FractionGrid<T> {
    rows: usize,
    cols: usize,
    cells: Vec<T>,
}

impl<T: Scalar> FractionGrid<T> {
    pub fn new(rows: usize, cols: usize, cells: Vec<T>) -> Result<Self> {
        check_len(rows, cols, cells.len())?;
        if let Some(index) = cells.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(index));
        }
        Ok(Self { rows, cols, cells })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cells: vec![T::zero(); rows * cols],
        }
    }

    pub fn constant(rows: usize, cols: usize, v: T) -> Self {
        Self {
            rows,
            cols,
            cells: vec![v; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut cells = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                cells.push(f(r, c));
            }
        }
        Self { rows, cols, cells }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }
    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.cells[r * self.cols + c]
    }
    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.cells[r * self.cols + c] = v;
    }
    pub fn cells(&self) -> &[T] {
        &self.cells
    }
    pub fn cells_mut(&mut self) -> &mut [T] {
        &mut self.cells
    }

    pub fn tile(&self, tile_rows: usize, tile_cols: usize) -> Result<Vec<Tile<Self>>> {
        tile_generic(self.rows, self.cols, &self.cells, tile_rows, tile_cols, |tr, tc, v| Self {
            rows: tr,
            cols: tc,
            cells: v,
        })
    }

    pub fn stitch(rows: usize, cols: usize, tiles: &[Tile<Self>]) -> Result<Self> {
        fn parts<T>(g: &FractionGrid<T>) -> (usize, usize, &[T]) {
            (g.rows, g.cols, &g.cells)
        }
        let cells = stitch_generic(rows, cols, tiles, parts, T::zero())?;
        Ok(Self { rows, cols, cells })
    }
}

/// Elevation field in normalized units. Same container contract as
/// [`FractionGrid`] minus any range expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationGrid<T> {
    rows: usize,
    cols: usize,
    cells: Vec<T>,
}

impl<T: Scalar> ElevationGrid<T> {
    pub fn new(rows: usize, cols: usize, cells: Vec<T>) -> Result<Self> {
        check_len(rows, cols, cells.len())?;
        if let Some(index) = cells.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(index));
        }
        Ok(Self { rows, cols, cells })
    }

    pub fn constant(rows: usize, cols: usize, v: T) -> Self {
        Self {
            rows,
            cols,
            cells: vec![v; rows * cols],
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }
    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.cells[r * self.cols + c]
    }
    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.cells[r * self.cols + c] = v;
    }
    pub fn cells(&self) -> &[T] {
        &self.cells
    }
    pub fn cells_mut(&mut self) -> &mut [T] {
        &mut self.cells
    }

    /// Top-left `rows`×`cols` corner, for trimming to a tileable size.
    pub fn crop(&self, rows: usize, cols: usize) -> Result<Self> {
        if rows > self.rows || cols > self.cols {
            return Err(Error::ShapeMismatch(format!(
                "crop {rows}x{cols} exceeds grid {}x{}",
                self.rows, self.cols
            )));
        }
        let mut cells = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let start = r * self.cols;
            cells.extend_from_slice(&self.cells[start..start + cols]);
        }
        Ok(Self { rows, cols, cells })
    }

    pub fn tile(&self, tile_rows: usize, tile_cols: usize) -> Result<Vec<Tile<Self>>> {
        tile_generic(self.rows, self.cols, &self.cells, tile_rows, tile_cols, |tr, tc, v| Self {
            rows: tr,
            cols: tc,
            cells: v,
        })
    }
}

/// One tile of a larger grid plus its origin (top-left cell) in the source.
#[derive(Debug, Clone)]
pub struct Tile<G> {
    pub row0: usize,
    pub col0: usize,
    pub grid: G,
}

fn check_len(rows: usize, cols: usize, len: usize) -> Result<()> {
    if rows * cols != len {
        return Err(Error::ShapeMismatch(format!(
            "{rows}x{cols} grid needs {} cells, got {len}",
            rows * cols
        )));
    }
    Ok(())
}

fn tile_generic<C: Copy, G>(
    rows: usize,
    cols: usize,
    cells: &[C],
    tile_rows: usize,
    tile_cols: usize,
    build: impl Fn(usize, usize, Vec<C>) -> G,
) -> Result<Vec<Tile<G>>> {
    if tile_rows == 0 || tile_cols == 0 || rows % tile_rows != 0 || cols % tile_cols != 0 {
        return Err(Error::IndivisibleDimensions {
            rows,
            cols,
            tile_rows,
            tile_cols,
        });
    }
    let mut tiles = Vec::with_capacity((rows / tile_rows) * (cols / tile_cols));
    for row0 in (0..rows).step_by(tile_rows) {
        for col0 in (0..cols).step_by(tile_cols) {
            let mut v = Vec::with_capacity(tile_rows * tile_cols);
            for r in 0..tile_rows {
                let start = (row0 + r) * cols + col0;
                v.extend_from_slice(&cells[start..start + tile_cols]);
            }
            tiles.push(Tile {
                row0,
                col0,
                grid: build(tile_rows, tile_cols, v),
            });
        }
    }
    Ok(tiles)
}

fn stitch_generic<C: Copy, G>(
    rows: usize,
    cols: usize,
    tiles: &[Tile<G>],
    parts: impl for<'a> Fn(&'a G) -> (usize, usize, &'a [C]),
    fill: C,
) -> Result<Vec<C>> {
    let mut cells = vec![fill; rows * cols];
    let mut covered = 0usize;
    for t in tiles {
        let (tr, tc, src) = parts(&t.grid);
        if t.row0 + tr > rows || t.col0 + tc > cols {
            return Err(Error::ShapeMismatch(format!(
                "tile at ({},{}) of size {tr}x{tc} exceeds target {rows}x{cols}",
                t.row0, t.col0
            )));
        }
        for r in 0..tr {
            let dst = (t.row0 + r) * cols + t.col0;
            cells[dst..dst + tc].copy_from_slice(&src[r * tc..(r + 1) * tc]);
        }
        covered += tr * tc;
    }
    if covered != rows * cols {
        return Err(Error::ShapeMismatch(format!(
            "tiles cover {covered} cells, target has {}",
            rows * cols
        )));
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_grid_rejects_illegal_cells() {
        let err = BinaryGrid::new(1, 3, vec![0, 2, 1]).unwrap_err();
        match err {
            Error::IllegalPixel { value: 2, index: 1 } => {}
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn fraction_grid_rejects_non_finite() {
        let err = FractionGrid::new(1, 2, vec![0.5f64, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteValue(1)));
    }

    #[test]
    fn thousand_grid_tiles_into_hundred() {
        let g = BinaryGrid::zeros(1000, 1000);
        let tiles = g.tile(100, 100).unwrap();
        assert_eq!(tiles.len(), 100);
        assert_eq!(tiles[0].grid.rows(), 100);
        // Row-major tile order: second tile starts at column 100.
        assert_eq!((tiles[1].row0, tiles[1].col0), (0, 100));
    }

    #[test]
    fn tiling_own_size_is_identity() {
        let g = BinaryGrid::from_fn(4, 4, |r, c| (r + c) % 2 == 0);
        let tiles = g.tile(4, 4).unwrap();
        assert_eq!(tiles.len(), 1);
        assert_eq!(tiles[0].grid, g);
        assert_eq!((tiles[0].row0, tiles[0].col0), (0, 0));
    }

    #[test]
    fn indivisible_dimensions_rejected() {
        let g = BinaryGrid::zeros(10, 10);
        assert!(matches!(
            g.tile(3, 3),
            Err(Error::IndivisibleDimensions { .. })
        ));
    }

    #[test]
    fn tile_then_stitch_roundtrips() {
        let g = BinaryGrid::from_fn(6, 9, |r, c| (r * 31 + c * 7) % 3 == 0);
        let tiles = g.tile(3, 3).unwrap();
        let back = BinaryGrid::stitch(6, 9, &tiles).unwrap();
        assert_eq!(back, g);

        let f = FractionGrid::from_fn(6, 6, |r, c| (r * 6 + c) as f64 / 36.0);
        let tiles = f.tile(2, 3).unwrap();
        let back = FractionGrid::stitch(6, 6, &tiles).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn crop_takes_top_left_corner() {
        let e = ElevationGrid::new(3, 3, (0..9).map(|i| i as f64).collect()).unwrap();
        let c = e.crop(2, 2).unwrap();
        assert_eq!(c.cells(), &[0.0, 1.0, 3.0, 4.0]);
    }
}
