//! Fraction algebra between FIMs and WFMs, the evaluation band mask,
//! thresholding, and the SWI water index.

use serde::{Deserialize, Serialize};

use crate::raster::{BinaryGrid, FractionGrid};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Linear downscaling factor between FIM and WFM resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleFactor(usize);

impl ScaleFactor {
    /// Shipped configuration: one WFM cell covers a 10×10 pixel patch.
    pub const DEFAULT: ScaleFactor = ScaleFactor(10);

    pub fn new(f: usize) -> Result<Self> {
        if f < 2 {
            return Err(Error::InvalidConfig(format!("scale factor {f} < 2")));
        }
        Ok(Self(f))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }
}

/// Water-fraction interval selecting pixels that count for evaluation.
/// Both ends are strict: a parent cell sitting exactly on a limit is
/// excluded, which matters because aggregated fractions live on the 1/f²
/// lattice and do hit 0.25 exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandLimits {
    lo: f64,
    hi: f64,
}

impl BandLimits {
    pub const DEFAULT: BandLimits = BandLimits { lo: 0.25, hi: 0.85 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo >= hi || hi > 1.0 {
            return Err(Error::InvalidConfig(format!(
                "band limits ({lo}, {hi}) must satisfy 0 <= lo < hi <= 1"
            )));
        }
        Ok(Self { lo, hi })
    }

    #[inline]
    pub fn lo(self) -> f64 {
        self.lo
    }
    #[inline]
    pub fn hi(self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn contains<T: Scalar>(self, v: T) -> bool {
        let v = v.as_f64();
        v > self.lo && v < self.hi
    }
}

/// Patch-mean water fractions of a binary map: output (i,j) is the wet
/// fraction of the f×f patch at (f·i, f·j). Every value is an integer
/// multiple of 1/f² by construction.
pub fn aggregate<T: Scalar>(fim: &BinaryGrid, f: ScaleFactor) -> Result<FractionGrid<T>> {
    let f = f.get();
    if fim.rows() % f != 0 || fim.cols() % f != 0 {
        return Err(Error::IndivisibleDimensions {
            rows: fim.rows(),
            cols: fim.cols(),
            tile_rows: f,
            tile_cols: f,
        });
    }
    let denom = T::from_usize(f * f);
    Ok(FractionGrid::from_fn(fim.rows() / f, fim.cols() / f, |i, j| {
        let mut wet = 0usize;
        for k in 0..f {
            for l in 0..f {
                wet += fim.get(f * i + k, f * j + l) as usize;
            }
        }
        T::from_usize(wet) / denom
    }))
}

/// High-resolution evaluation mask: a pixel is selected iff its parent WFM
/// cell value lies strictly inside the band.
pub fn band_mask<T: Scalar>(wfm: &FractionGrid<T>, band: BandLimits, f: ScaleFactor) -> BinaryGrid {
    let f = f.get();
    BinaryGrid::from_fn(wfm.rows() * f, wfm.cols() * f, |r, c| {
        band.contains(wfm.get(r / f, c / f))
    })
}

/// Spectral water index (blue − nir)/(red + green + blue), cellwise.
/// Output values are unbounded; callers threshold them separately.
pub fn swi<T: Scalar>(
    blue: &FractionGrid<T>,
    green: &FractionGrid<T>,
    red: &FractionGrid<T>,
    nir: &FractionGrid<T>,
) -> Result<FractionGrid<T>> {
    for (name, g) in [("green", green), ("red", red), ("nir", nir)] {
        if g.rows() != blue.rows() || g.cols() != blue.cols() {
            return Err(Error::ShapeMismatch(format!(
                "{name} band is {}x{}, blue is {}x{}",
                g.rows(),
                g.cols(),
                blue.rows(),
                blue.cols()
            )));
        }
    }
    let mut cells = Vec::with_capacity(blue.cells().len());
    for (index, (((&b, &g), &r), &n)) in blue
        .cells()
        .iter()
        .zip(green.cells())
        .zip(red.cells())
        .zip(nir.cells())
        .enumerate()
    {
        let denom = r + g + b;
        if denom <= T::zero() {
            return Err(Error::ZeroDenominator(index));
        }
        cells.push((b - n) / denom);
    }
    FractionGrid::new(blue.rows(), blue.cols(), cells)
}

/// Binarize at `theta`; comparison is `>=` so a cell equal to the threshold
/// counts as inundated.
pub fn threshold_grid<T: Scalar>(grid: &FractionGrid<T>, theta: T) -> BinaryGrid {
    BinaryGrid::from_fn(grid.rows(), grid.cols(), |r, c| grid.get(r, c) >= theta)
}

/// Otsu's histogram threshold over the grid's value range. A convenience
/// for picking an SWI cut when no supervised choice is available; not part
/// of the fraction-algebra contract, and never applied implicitly.
pub fn otsu_threshold<T: Scalar>(grid: &FractionGrid<T>) -> T {
    const BINS: usize = 256;
    let cells = grid.cells();
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in cells {
        let v = v.as_f64();
        min = min.min(v);
        max = max.max(v);
    }
    if !(max > min) {
        return T::from_f64(min);
    }
    let scale = BINS as f64 / (max - min);
    let mut hist = [0usize; BINS];
    for v in cells {
        let bin = (((v.as_f64() - min) * scale) as usize).min(BINS - 1);
        hist[bin] += 1;
    }
    let total = cells.len() as f64;
    let total_mean: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &n)| i as f64 * n as f64)
        .sum::<f64>()
        / total;
    let (mut w0, mut sum0) = (0.0f64, 0.0f64);
    let (mut best_bin, mut best_var) = (0usize, -1.0f64);
    for (i, &n) in hist.iter().enumerate() {
        w0 += n as f64;
        if w0 == 0.0 {
            continue;
        }
        let w1 = total - w0;
        if w1 == 0.0 {
            break;
        }
        sum0 += i as f64 * n as f64;
        let mu0 = sum0 / w0;
        let mu1 = (total_mean * total - sum0) / w1;
        let var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if var > best_var {
            best_var = var;
            best_bin = i;
        }
    }
    // Threshold at the upper edge of the best split bin.
    T::from_f64(min + (best_bin as f64 + 1.0) / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f10() -> ScaleFactor {
        ScaleFactor::DEFAULT
    }

    #[test]
    fn aggregate_of_zeros_is_zero() {
        let fim = BinaryGrid::zeros(100, 100);
        let wfm: FractionGrid<f64> = aggregate(&fim, f10()).unwrap();
        assert_eq!(wfm.rows(), 10);
        assert!(wfm.cells().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn aggregate_of_checkerboard_is_half() {
        let fim = BinaryGrid::from_fn(100, 100, |r, c| (r + c) % 2 == 0);
        let wfm: FractionGrid<f64> = aggregate(&fim, f10()).unwrap();
        assert!(wfm.cells().iter().all(|&v| v == 0.5));
    }

    // Counting oracle: build one patch with a known number of wet cells and
    // compare the aggregate against an independent count over the raster.
    #[test]
    fn aggregate_matches_counting_oracle() {
        let fim = BinaryGrid::from_fn(10, 10, |r, c| r * 10 + c < 37);
        let wet = fim.cells().iter().filter(|&&v| v == 1).count();
        assert_eq!(wet, 37);
        let wfm: FractionGrid<f64> = aggregate(&fim, f10()).unwrap();
        assert_eq!(wfm.cells(), &[wet as f64 / 100.0]);
        assert_eq!(wfm.get(0, 0), 0.37);
    }

    #[test]
    fn aggregate_rejects_indivisible_shapes() {
        let fim = BinaryGrid::zeros(105, 100);
        assert!(matches!(
            aggregate::<f64>(&fim, f10()),
            Err(Error::IndivisibleDimensions { .. })
        ));
    }

    #[test]
    fn band_mask_excludes_exact_boundaries() {
        // 0.25 sits exactly on the open lower limit: excluded. 0.5 is
        // inside, 0.85 exact and 0.9 are out.
        let wfm = FractionGrid::new(1, 4, vec![0.25f64, 0.5, 0.85, 0.9]).unwrap();
        let mask = band_mask(&wfm, BandLimits::DEFAULT, f10());
        assert_eq!(mask.rows(), 10);
        assert_eq!(mask.cols(), 40);
        let children = |cell: usize| -> usize {
            let mut n = 0;
            for r in 0..10 {
                for c in 0..10 {
                    n += mask.get(r, cell * 10 + c) as usize;
                }
            }
            n
        };
        assert_eq!(children(0), 0);
        assert_eq!(children(1), 100);
        assert_eq!(children(2), 0);
        assert_eq!(children(3), 0);
    }

    #[test]
    fn band_mask_cardinality_is_f_squared_per_in_band_cell() {
        let wfm = FractionGrid::new(2, 2, vec![0.3f64, 0.84, 0.99, 0.1]).unwrap();
        let mask = band_mask(&wfm, BandLimits::DEFAULT, f10());
        assert_eq!(mask.count_ones(), 2 * 100);
    }

    #[test]
    fn swi_matches_direct_formula() {
        let g = |v: f64| FractionGrid::constant(2, 2, v);
        // blue = nir everywhere -> all zeros.
        let out = swi(&g(0.4), &g(0.3), &g(0.3), &g(0.4)).unwrap();
        assert!(out.cells().iter().all(|&v| v == 0.0));
        // Direct evaluation: (0.4 - 0.1) / (0.3 + 0.3 + 0.4) = 0.3.
        let out = swi(&g(0.4), &g(0.3), &g(0.3), &g(0.1)).unwrap();
        for &v in out.cells() {
            assert!((v - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn swi_rejects_zero_denominator() {
        let g = |v: f64| FractionGrid::constant(1, 2, v);
        assert!(matches!(
            swi(&g(0.0), &g(0.0), &g(0.0), &g(0.1)),
            Err(Error::ZeroDenominator(0))
        ));
    }

    #[test]
    fn threshold_grid_uses_geq() {
        let g = FractionGrid::new(1, 3, vec![0.2f64, 0.5, 0.7]).unwrap();
        assert_eq!(threshold_grid(&g, 0.5).cells(), &[0, 1, 1]);
        // theta = 0 marks everything for non-negative grids.
        assert_eq!(threshold_grid(&g, 0.0).cells(), &[1, 1, 1]);
    }

    #[test]
    fn otsu_separates_bimodal_values() {
        let mut cells = vec![0.1f64; 50];
        cells.extend(vec![0.9f64; 50]);
        let g = FractionGrid::new(10, 10, cells).unwrap();
        let t = otsu_threshold(&g);
        assert!(t > 0.1 && t < 0.9, "threshold {t} outside the gap");
    }

    proptest! {
        // Aggregates land on the 1/f² lattice and stay in [0,1].
        #[test]
        fn aggregate_lattice_property(cells in proptest::collection::vec(0u8..=1, 400)) {
            let fim = BinaryGrid::new(20, 20, cells).unwrap();
            let f = ScaleFactor::new(2).unwrap();
            let wfm: FractionGrid<f64> = aggregate(&fim, f).unwrap();
            for &v in wfm.cells() {
                prop_assert!((0.0..=1.0).contains(&v));
                let scaled = v * 4.0;
                prop_assert!((scaled - scaled.round()).abs() < 1e-12);
            }
        }

        // Thresholding an aggregate at 0 and just above 1 brackets every mask.
        #[test]
        fn threshold_extremes(cells in proptest::collection::vec(0u8..=1, 100)) {
            let fim = BinaryGrid::new(10, 10, cells).unwrap();
            let f = ScaleFactor::new(5).unwrap();
            let wfm: FractionGrid<f64> = aggregate(&fim, f).unwrap();
            prop_assert!(threshold_grid(&wfm, 0.0).cells().iter().all(|&v| v == 1));
            prop_assert!(threshold_grid(&wfm, 1.0 + 1e-9).cells().iter().all(|&v| v == 0));
        }
    }
}
