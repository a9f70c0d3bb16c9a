//! ROC curves over masked probability maps.

use crate::raster::{BinaryGrid, FractionGrid};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// One operating point per threshold, where the threshold set is the
/// percent lattice {0, 0.01, ..., 1} united with every distinct score, and
/// a cell counts as predicted wet when its score is >= the threshold.
///
/// Points come back ordered by descending threshold, which makes both rates
/// non-decreasing along the curve.
pub fn roc(
    scores: &FractionGrid<f64>,
    truth: &BinaryGrid,
    mask: &BinaryGrid,
) -> Result<Vec<RocPoint>> {
    if scores.rows() != truth.rows()
        || scores.cols() != truth.cols()
        || scores.rows() != mask.rows()
        || scores.cols() != mask.cols()
    {
        return Err(Error::ShapeMismatch(format!(
            "scores {}x{}, truth {}x{}, mask {}x{}",
            scores.rows(),
            scores.cols(),
            truth.rows(),
            truth.cols(),
            mask.rows(),
            mask.cols()
        )));
    }

    let mut pairs: Vec<(f64, bool)> = Vec::new();
    for (i, &s) in scores.cells().iter().enumerate() {
        if mask.cells()[i] == 1 {
            pairs.push((s, truth.cells()[i] == 1));
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyMask);
    }
    let pos = pairs.iter().filter(|(_, y)| *y).count();
    let neg = pairs.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassMask);
    }

    let mut thresholds: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    thresholds.extend(pairs.iter().map(|(s, _)| *s));
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();

    // Sweep thresholds high to low, absorbing scores as they cross; each
    // point is then an O(1) update instead of a rescan.
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut points = Vec::with_capacity(thresholds.len());
    let mut next = 0usize;
    let (mut tp, mut fp) = (0usize, 0usize);
    for theta in thresholds {
        while next < pairs.len() && pairs[next].0 >= theta {
            if pairs[next].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            next += 1;
        }
        points.push(RocPoint {
            threshold: theta,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(points)
}

/// Trapezoidal area under the curve, with (0,0) and (1,1) appended so a
/// partial set of operating points still spans the unit square.
pub fn auc(points: &[RocPoint]) -> f64 {
    let mut xy: Vec<(f64, f64)> = points.iter().map(|p| (p.fpr, p.tpr)).collect();
    xy.push((0.0, 0.0));
    xy.push((1.0, 1.0));
    xy.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut area = 0.0;
    for w in xy.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        area += (x1 - x0) * (y0 + y1) * 0.5;
    }
    area
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn full_mask(rows: usize, cols: usize) -> BinaryGrid {
        BinaryGrid::from_fn(rows, cols, |_, _| true)
    }

    // Four-cell oracle worked by hand: scores [0.9, 0.8, 0.3, 0.1] against
    // truth [1, 1, 0, 1] trace the staircase (0,1/3), (0,2/3), (1,2/3),
    // (1,1), whose area is 2/3.
    #[test]
    fn hand_case_auc_is_two_thirds() {
        let scores = FractionGrid::new(1, 4, vec![0.9, 0.8, 0.3, 0.1]).unwrap();
        let truth = BinaryGrid::new(1, 4, vec![1, 1, 0, 1]).unwrap();
        let points = roc(&scores, &truth, &full_mask(1, 4)).unwrap();
        assert_abs_diff_eq!(auc(&points), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn perfect_separation_scores_one() {
        let truth = BinaryGrid::from_fn(4, 4, |r, _| r < 2);
        let scores = FractionGrid::from_fn(4, 4, |r, _| if r < 2 { 0.93 } else { 0.07 });
        let points = roc(&scores, &truth, &full_mask(4, 4)).unwrap();
        assert_abs_diff_eq!(auc(&points), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_scores_give_half() {
        let truth = BinaryGrid::from_fn(4, 4, |r, _| r < 1);
        let scores = FractionGrid::constant(4, 4, 0.42);
        let points = roc(&scores, &truth, &full_mask(4, 4)).unwrap();
        assert_abs_diff_eq!(auc(&points), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn single_class_mask_is_rejected() {
        let truth = BinaryGrid::zeros(3, 3);
        let scores = FractionGrid::constant(3, 3, 0.5);
        assert!(matches!(
            roc(&scores, &truth, &full_mask(3, 3)),
            Err(Error::SingleClassMask)
        ));
    }

    #[test]
    fn empty_mask_is_rejected() {
        let truth = BinaryGrid::from_fn(3, 3, |r, _| r == 0);
        let scores = FractionGrid::constant(3, 3, 0.5);
        let mask = BinaryGrid::zeros(3, 3);
        assert!(matches!(roc(&scores, &truth, &mask), Err(Error::EmptyMask)));
    }

    #[test]
    fn lattice_thresholds_are_present() {
        let truth = BinaryGrid::from_fn(2, 2, |r, _| r == 0);
        let scores = FractionGrid::new(2, 2, vec![0.815, 0.605, 0.405, 0.135]).unwrap();
        let points = roc(&scores, &truth, &full_mask(2, 2)).unwrap();
        // 101 lattice points plus 4 distinct off-lattice scores.
        assert_eq!(points.len(), 105);
        assert!(points.iter().any(|p| p.threshold == 0.815));
        assert!(points.iter().any(|p| p.threshold == 0.37));
    }

    proptest! {
        #[test]
        fn rates_are_monotone_along_the_sweep(
            values in proptest::collection::vec((0.0f64..1.0, any::<bool>()), 8..64)
        ) {
            let n = values.len();
            let has_both = values.iter().any(|(_, y)| *y) && values.iter().any(|(_, y)| !*y);
            prop_assume!(has_both);
            let scores = FractionGrid::new(1, n, values.iter().map(|(s, _)| *s).collect()).unwrap();
            let truth = BinaryGrid::new(1, n, values.iter().map(|(_, y)| *y as u8).collect()).unwrap();
            let points = roc(&scores, &truth, &full_mask(1, n)).unwrap();
            for w in points.windows(2) {
                prop_assert!(w[1].threshold < w[0].threshold);
                prop_assert!(w[1].fpr >= w[0].fpr);
                prop_assert!(w[1].tpr >= w[0].tpr);
            }
            let a = auc(&points);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
