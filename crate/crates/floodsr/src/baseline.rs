//! Non-data-driven downscalers: bicubic and Lanczos interpolation of the
//! WFM followed by thresholding, plus the all-dry predictor.
//!
//! Interpolation uses pixel-center alignment (output center (I+0.5)/f lands
//! in WFM coordinates), clamp-to-edge sampling, and per-pixel weight
//! renormalization. Renormalization matters for the fraction semantics:
//! raw Lanczos tap weights do not sum to 1, and constants must survive
//! resampling exactly.

use serde::{Deserialize, Serialize};

use crate::raster::{BinaryGrid, FractionGrid};
use crate::scalar::Scalar;
use crate::wfm::{threshold_grid, ScaleFactor};
use crate::{Error, Result};

/// Interpolation kernel selection.
///
/// Bicubic sharpness defaults to a = −0.5 (Catmull-Rom); Lanczos lobe count
/// defaults to 3. Both follow common convention since no canonical choice
/// exists for fraction rasters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelSpec {
    Bicubic { a: f64 },
    Lanczos { lobes: usize },
}

impl KernelSpec {
    pub const BICUBIC_DEFAULT: KernelSpec = KernelSpec::Bicubic { a: -0.5 };
    pub const LANCZOS_DEFAULT: KernelSpec = KernelSpec::Lanczos { lobes: 3 };

    pub fn bicubic(a: f64) -> Result<Self> {
        if !(a < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "bicubic sharpness a = {a} must be negative"
            )));
        }
        Ok(KernelSpec::Bicubic { a })
    }

    pub fn lanczos(lobes: usize) -> Result<Self> {
        if !(2..=4).contains(&lobes) {
            return Err(Error::InvalidConfig(format!(
                "lanczos lobe count {lobes} must be 2, 3, or 4"
            )));
        }
        Ok(KernelSpec::Lanczos { lobes })
    }

    /// Half-width of the kernel support in input pixels.
    pub fn radius(self) -> usize {
        match self {
            KernelSpec::Bicubic { .. } => 2,
            KernelSpec::Lanczos { lobes } => lobes,
        }
    }

    pub fn weight<T: Scalar>(self, t: T) -> T {
        match self {
            KernelSpec::Bicubic { a } => bicubic_weight(t, T::from_f64(a)),
            KernelSpec::Lanczos { lobes } => lanczos_weight(t, lobes),
        }
    }
}

/// Piecewise-cubic kernel:
/// w = (a+2)|t|³ − (a+3)|t|² + 1 for |t| ≤ 1,
/// w = a|t|³ − 5a|t|² + 8a|t| − 4a for 1 < |t| < 2, else 0.
pub fn bicubic_weight<T: Scalar>(t: T, a: T) -> T {
    let x = t.abs();
    let one = T::one();
    let two = one + one;
    if x <= one {
        ((a + two) * x - (a + two + one)) * x * x + one
    } else if x < two {
        let four = two + two;
        ((a * x - (four + one) * a) * x + (four + four) * a) * x - four * a
    } else {
        T::zero()
    }
}

/// Windowed sinc kernel: w = sinc(t)·sinc(t/lobes) for |t| < lobes, else 0,
/// with normalized sinc(t) = sin(πt)/(πt) and w(0) = 1.
pub fn lanczos_weight<T: Scalar>(t: T, lobes: usize) -> T {
    let x = t.abs();
    if x >= T::from_usize(lobes) {
        return T::zero();
    }
    sinc(x) * sinc(x / T::from_usize(lobes))
}

fn sinc<T: Scalar>(t: T) -> T {
    if t == T::zero() {
        return T::one();
    }
    let pt = t * T::PI();
    pt.sin() / pt
}

/// Per-axis resampling plan: for each output index, the first source tap
/// index (pre-clamp) and the renormalized tap weights.
struct AxisTaps<T> {
    first: Vec<isize>,
    weights: Vec<T>,
    taps: usize,
}

fn axis_taps<T: Scalar>(len_in: usize, f: usize, kernel: KernelSpec) -> AxisTaps<T> {
    let radius = kernel.radius();
    let taps = 2 * radius;
    let len_out = len_in * f;
    let mut first = Vec::with_capacity(len_out);
    let mut weights = Vec::with_capacity(len_out * taps);
    for out in 0..len_out {
        // Pixel-center alignment: centers sit at integers in input space.
        let x = (out as f64 + 0.5) / f as f64 - 0.5;
        let base = x.floor() as isize;
        let lo = base - radius as isize + 1;
        first.push(lo);
        let start = weights.len();
        let mut sum = T::zero();
        for j in 0..taps {
            let w = kernel.weight(T::from_f64(x - (lo + j as isize) as f64));
            weights.push(w);
            sum += w;
        }
        // Renormalize so the taps sum to exactly 1: divide through, then
        // absorb the rounding residue into the largest tap.
        let slice = &mut weights[start..];
        let mut largest = 0;
        for j in 0..slice.len() {
            slice[j] = slice[j] / sum;
            if slice[j].abs() > slice[largest].abs() {
                largest = j;
            }
        }
        let mut rest = T::zero();
        for (j, &w) in slice.iter().enumerate() {
            if j != largest {
                rest += w;
            }
        }
        slice[largest] = T::one() - rest;
    }
    AxisTaps {
        first,
        weights,
        taps,
    }
}

/// Separable 1-D resampling pass along the row direction (`cols_in` →
/// `cols_in·f`), applied to a row-major buffer of `rows` rows.
///
/// Each output value is anchor + Σ wᵢ·(vᵢ − anchor) with Σ wᵢ forced to 1,
/// where the anchor is the nearest tap's value; this keeps constant inputs
/// bit-exact, which plain Σ wᵢ·vᵢ does not guarantee in floating point.
fn resample_rows<T: Scalar>(
    input: &[T],
    rows: usize,
    cols_in: usize,
    plan: &AxisTaps<T>,
) -> Vec<T> {
    let cols_out = plan.first.len();
    let mut out = Vec::with_capacity(rows * cols_out);
    for r in 0..rows {
        let row = &input[r * cols_in..(r + 1) * cols_in];
        for o in 0..cols_out {
            let lo = plan.first[o];
            let ws = &plan.weights[o * plan.taps..(o + 1) * plan.taps];
            let anchor_idx = (lo + plan.taps as isize / 2 - 1).clamp(0, cols_in as isize - 1);
            let anchor = row[anchor_idx as usize];
            let mut acc = T::zero();
            for (j, &w) in ws.iter().enumerate() {
                let idx = (lo + j as isize).clamp(0, cols_in as isize - 1) as usize;
                acc += w * (row[idx] - anchor);
            }
            out.push(anchor + acc);
        }
    }
    out
}

fn transpose<T: Copy>(input: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(input.len());
    for c in 0..cols {
        for r in 0..rows {
            out.push(input[r * cols + c]);
        }
    }
    out
}

/// Kernel-interpolated ×f upsampling of a fraction grid, clipped to [0,1].
pub fn interp_upscale<T: Scalar>(
    wfm: &FractionGrid<T>,
    f: ScaleFactor,
    kernel: KernelSpec,
) -> FractionGrid<T> {
    let f = f.get();
    let (rows_in, cols_in) = (wfm.rows(), wfm.cols());
    let col_plan = axis_taps::<T>(cols_in, f, kernel);
    let row_plan = axis_taps::<T>(rows_in, f, kernel);

    let horiz = resample_rows(wfm.cells(), rows_in, cols_in, &col_plan);
    let cols_out = cols_in * f;
    // Second pass runs down the columns; transpose so it reuses the row code.
    let horiz_t = transpose(&horiz, rows_in, cols_out);
    let full_t = resample_rows(&horiz_t, cols_out, rows_in, &row_plan);
    let rows_out = rows_in * f;
    let mut cells = transpose(&full_t, cols_out, rows_out);
    for v in &mut cells {
        *v = v.min(T::one()).max(T::zero());
    }
    FractionGrid::new(rows_out, cols_out, cells).expect("resampled cells are finite")
}

/// Interpolate then binarize at `theta` (default 0.5 at call sites).
pub fn baseline_downscale<T: Scalar>(
    wfm: &FractionGrid<T>,
    f: ScaleFactor,
    kernel: KernelSpec,
    theta: T,
) -> BinaryGrid {
    threshold_grid(&interp_upscale(wfm, f, kernel), theta)
}

/// The majority-class predictor: everything dry.
pub fn naive_downscale<T: Scalar>(wfm: &FractionGrid<T>, f: ScaleFactor) -> BinaryGrid {
    BinaryGrid::zeros(wfm.rows() * f.get(), wfm.cols() * f.get())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kernel_anchors() {
        assert_eq!(bicubic_weight(0.0, -0.5), 1.0);
        assert_eq!(bicubic_weight(1.0, -0.5), 0.0);
        assert_eq!(bicubic_weight(2.0, -0.5), 0.0);
        assert_eq!(bicubic_weight(2.5, -0.5), 0.0);
        assert_eq!(lanczos_weight(0.0, 3), 1.0);
        for t in [1.0, 2.0, -1.0, -2.0] {
            assert!(lanczos_weight::<f64>(t, 3).abs() < 1e-15, "sinc zero at {t}");
        }
        assert_eq!(lanczos_weight(3.0, 3), 0.0);
    }

    // Direct evaluation oracle: (a+2)|t|³ − (a+3)|t|² + 1 at t=0.5, a=−0.5
    // is 1.5·0.125 − 2.5·0.25 + 1 = 0.5625.
    #[test]
    fn bicubic_half_pixel_value() {
        let direct = 1.5f64 * 0.125 - 2.5 * 0.25 + 1.0;
        assert_eq!(direct, 0.5625);
        assert!((bicubic_weight::<f64>(0.5, -0.5) - 0.5625).abs() < 1e-12);
    }

    // Numeric oracle: sinc(1.5)·sinc(0.5) with normalized sinc.
    #[test]
    fn lanczos_mid_lobe_value() {
        let s = |t: f64| (std::f64::consts::PI * t).sin() / (std::f64::consts::PI * t);
        let oracle = s(1.5) * s(0.5);
        let w = lanczos_weight(1.5, 3);
        assert!((w - oracle).abs() < 1e-15);
        assert!((w - (-0.13509)).abs() < 1e-5);
    }

    #[test]
    fn kernels_are_even() {
        for i in 0..200 {
            let t = -2.5 + i as f64 * 0.025;
            assert_eq!(bicubic_weight(t, -0.5), bicubic_weight(-t, -0.5));
            assert_eq!(lanczos_weight(t, 3), lanczos_weight(-t, 3));
        }
    }

    #[test]
    fn upscale_shape_is_f_times_input() {
        let wfm = FractionGrid::<f64>::constant(10, 10, 0.3);
        let out = interp_upscale(&wfm, ScaleFactor::DEFAULT, KernelSpec::BICUBIC_DEFAULT);
        assert_eq!((out.rows(), out.cols()), (100, 100));
    }

    #[test]
    fn constants_reproduce_exactly() {
        for kernel in [KernelSpec::BICUBIC_DEFAULT, KernelSpec::LANCZOS_DEFAULT] {
            for c in [0.0f64, 0.37, 0.25, 1.0, 0.849999] {
                let wfm = FractionGrid::constant(7, 5, c);
                let out = interp_upscale(&wfm, ScaleFactor::new(4).unwrap(), kernel);
                assert!(
                    out.cells().iter().all(|&v| v == c),
                    "kernel {kernel:?} failed to keep constant {c} exact"
                );
            }
        }
    }

    // Independent per-pixel oracle for a single hot cell: the output is the
    // tensor product of the renormalized 1-D kernel tap weights.
    #[test]
    fn center_hot_matches_kernel_tensor_product() {
        for kernel in [KernelSpec::BICUBIC_DEFAULT, KernelSpec::LANCZOS_DEFAULT] {
            let (hr, hc) = (4usize, 5usize);
            let wfm = FractionGrid::from_fn(10, 10, |r, c| {
                if (r, c) == (hr, hc) {
                    1.0f64
                } else {
                    0.0
                }
            });
            let f = 10usize;
            let out = interp_upscale(&wfm, ScaleFactor::DEFAULT, kernel);

            let norm_weight_at = |out_idx: usize, src: usize| -> f64 {
                let x = (out_idx as f64 + 0.5) / f as f64 - 0.5;
                let base = x.floor() as isize;
                let radius = kernel.radius() as isize;
                let mut sum = 0.0;
                let mut w_src = 0.0;
                for j in (base - radius + 1)..=(base + radius) {
                    let w: f64 = kernel.weight(x - j as f64);
                    sum += w;
                    // Clamp-to-edge never matters here: probes stay interior.
                    if j == src as isize {
                        w_src += w;
                    }
                }
                w_src / sum
            };

            // Probe interior pixels at assorted sub-pixel offsets.
            for out_r in [38usize, 41, 45, 49, 52] {
                for out_c in [48usize, 51, 55, 59, 62] {
                    let expect =
                        (norm_weight_at(out_r, hr) * norm_weight_at(out_c, hc)).clamp(0.0, 1.0);
                    let got = out.get(out_r, out_c);
                    assert!(
                        (got - expect).abs() < 1e-12,
                        "{kernel:?} at ({out_r},{out_c}): got {got}, oracle {expect}"
                    );
                }
            }
        }
    }

    #[test]
    fn half_plane_boundary_stays_near_midline() {
        let wfm = FractionGrid::from_fn(10, 10, |_, c| if c < 5 { 1.0f64 } else { 0.0 });
        for kernel in [KernelSpec::BICUBIC_DEFAULT, KernelSpec::LANCZOS_DEFAULT] {
            let fim = baseline_downscale(&wfm, ScaleFactor::DEFAULT, kernel, 0.5);
            // The wet/dry edge in input coords is at 4.5, i.e. output 49.5.
            for r in 0..100 {
                assert_eq!(fim.get(r, 47), 1, "{kernel:?} row {r} wet side");
                assert_eq!(fim.get(r, 52), 0, "{kernel:?} row {r} dry side");
            }
        }
    }

    #[test]
    fn bicubic_preserves_linear_ramp_in_interior() {
        let (b, c) = (0.03f64, 0.02f64);
        let wfm = FractionGrid::from_fn(10, 10, |r, col| 0.2 + b * r as f64 + c * col as f64);
        let out = interp_upscale(&wfm, ScaleFactor::DEFAULT, KernelSpec::BICUBIC_DEFAULT);
        for out_r in 20..80 {
            for out_c in 20..80 {
                let y = (out_r as f64 + 0.5) / 10.0 - 0.5;
                let x = (out_c as f64 + 0.5) / 10.0 - 0.5;
                let expect = 0.2 + b * y + c * x;
                assert!(
                    (out.get(out_r, out_c) - expect).abs() < 1e-6,
                    "ramp broken at ({out_r},{out_c})"
                );
            }
        }
    }

    #[test]
    fn all_zero_and_all_one_wfm_downscale_trivially() {
        let zero = FractionGrid::<f64>::zeros(10, 10);
        let one = FractionGrid::<f64>::constant(10, 10, 1.0);
        for kernel in [KernelSpec::BICUBIC_DEFAULT, KernelSpec::LANCZOS_DEFAULT] {
            let dry = baseline_downscale(&zero, ScaleFactor::DEFAULT, kernel, 0.5);
            assert_eq!(dry.count_ones(), 0);
            let wet = baseline_downscale(&one, ScaleFactor::DEFAULT, kernel, 0.5);
            assert_eq!(wet.count_ones(), 100 * 100);
        }
    }

    #[test]
    fn naive_downscale_is_all_dry() {
        let wfm = FractionGrid::<f64>::constant(10, 10, 0.9);
        let fim = naive_downscale(&wfm, ScaleFactor::DEFAULT);
        assert_eq!((fim.rows(), fim.cols()), (100, 100));
        assert_eq!(fim.count_ones(), 0);
    }

    #[test]
    fn invalid_kernel_specs_are_rejected() {
        assert!(KernelSpec::bicubic(0.5).is_err());
        assert!(KernelSpec::lanczos(5).is_err());
        assert!(KernelSpec::lanczos(3).is_ok());
    }

    proptest! {
        // Smoke property: on smooth inputs the re-aggregated interpolation
        // stays within max-norm 0.5 of the source fractions.
        #[test]
        fn aggregate_of_interp_tracks_wfm(seed in 0u64..200) {
            let wfm = FractionGrid::from_fn(10, 10, |r, c| {
                let t = seed as f64 * 0.37;
                0.5 + 0.45 * ((r as f64 * 0.4 + t).sin() * (c as f64 * 0.3 - t).cos())
            });
            for kernel in [KernelSpec::BICUBIC_DEFAULT, KernelSpec::LANCZOS_DEFAULT] {
                let up = interp_upscale(&wfm, ScaleFactor::DEFAULT, kernel);
                let frac = crate::wfm::threshold_grid(&up, f64::NEG_INFINITY);
                prop_assert_eq!(frac.count_ones(), 100 * 100);
                let agg: FractionGrid<f64> =
                    crate::wfm::aggregate(&crate::wfm::threshold_grid(&up, 0.5), ScaleFactor::DEFAULT).unwrap();
                for (a, b) in agg.cells().iter().zip(wfm.cells()) {
                    prop_assert!((a - b).abs() <= 0.5 + 1e-12);
                }
            }
        }
    }
}
