//! Masked classification metrics and the exact small-sample statistics used
//! to compare models.
//!
//! All statistics are computed in f64 regardless of the model's scalar
//! type: the tolerances involved (1e-10 quantile bisection, 1e-12 p-value
//! anchors) are beneath f32 resolution, and counts lose nothing by widening.

pub mod beta;
pub mod roc;

use serde::{Deserialize, Serialize};

use crate::raster::BinaryGrid;
use crate::{Error, Result};

pub use beta::{beta_inv, betainc_reg, ln_gamma};
pub use roc::{auc, roc, RocPoint};

/// Pixel-level confusion counts over a mask, with "wet" as the positive
/// class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Tallies prediction against truth over the cells where `mask` is 1.
pub fn confusion(pred: &BinaryGrid, truth: &BinaryGrid, mask: &BinaryGrid) -> Result<ConfusionCounts> {
    if pred.rows() != truth.rows()
        || pred.cols() != truth.cols()
        || pred.rows() != mask.rows()
        || pred.cols() != mask.cols()
    {
        return Err(Error::ShapeMismatch(format!(
            "pred {}x{}, truth {}x{}, mask {}x{}",
            pred.rows(),
            pred.cols(),
            truth.rows(),
            truth.cols(),
            mask.rows(),
            mask.cols()
        )));
    }
    let mut counts = ConfusionCounts { tp: 0, tn: 0, fp: 0, fn_: 0 };
    for i in 0..pred.cells().len() {
        if mask.cells()[i] != 1 {
            continue;
        }
        match (pred.cells()[i] == 1, truth.cells()[i] == 1) {
            (true, true) => counts.tp += 1,
            (false, false) => counts.tn += 1,
            (true, false) => counts.fp += 1,
            (false, true) => counts.fn_ += 1,
        }
    }
    if counts.total() == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(counts)
}

pub fn accuracy(counts: &ConfusionCounts) -> f64 {
    (counts.tp + counts.tn) as f64 / counts.total() as f64
}

/// Matthews correlation coefficient. A zero marginal (all-one-class
/// predictions or truth) makes the usual expression 0/0; that case is
/// defined as 0, the no-information value.
pub fn mcc(counts: &ConfusionCounts) -> f64 {
    let (tp, tn, fp, fn_) = (
        counts.tp as f64,
        counts.tn as f64,
        counts.fp as f64,
        counts.fn_ as f64,
    );
    let denom_sq = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom_sq == 0.0 {
        return 0.0;
    }
    (tp * tn - fp * fn_) / denom_sq.sqrt()
}

/// Exact (Clopper-Pearson) two-sided confidence interval for a binomial
/// proportion from `k` successes in `n` trials.
///
/// The bounds are beta quantiles: lower = BetaInv(alpha/2; k, n-k+1), upper
/// = BetaInv(1-alpha/2; k+1, n-k), with the k = 0 and k = n edges pinned to
/// 0 and 1.
pub fn clopper_pearson(k: u64, n: u64, confidence: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidConfig("interval needs at least one trial".into()));
    }
    if k > n {
        return Err(Error::InvalidConfig(format!("{k} successes out of {n} trials")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "confidence {confidence} outside (0, 1)"
        )));
    }
    let alpha = 1.0 - confidence;
    let (k_f, n_f) = (k as f64, n as f64);
    let lo = if k == 0 {
        0.0
    } else {
        beta_inv(alpha / 2.0, k_f, n_f - k_f + 1.0)
    };
    let hi = if k == n {
        1.0
    } else {
        beta_inv(1.0 - alpha / 2.0, k_f + 1.0, n_f - k_f)
    };
    Ok((lo, hi))
}

/// Exact McNemar test on discordant counts: twice the binomial tail
/// P(X <= min(b, c)) for X ~ Bin(b + c, 1/2), capped at 1. With no
/// discordant pairs there is no evidence either way and p = 1.
///
/// The tail is accumulated in log space (term recurrence plus log-sum-exp),
/// so counts in the thousands cannot underflow.
pub fn mcnemar(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let m = b.min(c);
    // ln C(n,0)·2^-n = -n ln 2; each step multiplies by (n-i)/(i+1).
    let mut ln_term = -(n as f64) * std::f64::consts::LN_2;
    let mut ln_tail = ln_term;
    for i in 0..m {
        ln_term += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        ln_tail = log_sum_exp(ln_tail, ln_term);
    }
    (2.0 * ln_tail.exp()).min(1.0)
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Discordant-pair counts for two predictors against the same truth:
/// cells where exactly one of them is correct. Counts pooled from several
/// tiles can be summed before the test.
pub fn discordant_counts(
    pred_a: &BinaryGrid,
    pred_b: &BinaryGrid,
    truth: &BinaryGrid,
    mask: &BinaryGrid,
) -> Result<(u64, u64)> {
    let same = |g: &BinaryGrid| g.rows() == truth.rows() && g.cols() == truth.cols();
    if !same(pred_a) || !same(pred_b) || !same(mask) {
        return Err(Error::ShapeMismatch(format!(
            "a {}x{}, b {}x{}, truth {}x{}, mask {}x{}",
            pred_a.rows(),
            pred_a.cols(),
            pred_b.rows(),
            pred_b.cols(),
            truth.rows(),
            truth.cols(),
            mask.rows(),
            mask.cols()
        )));
    }
    let mut only_a = 0;
    let mut only_b = 0;
    let mut seen = 0u64;
    for i in 0..truth.cells().len() {
        if mask.cells()[i] != 1 {
            continue;
        }
        seen += 1;
        let a_right = pred_a.cells()[i] == truth.cells()[i];
        let b_right = pred_b.cells()[i] == truth.cells()[i];
        match (a_right, b_right) {
            (true, false) => only_a += 1,
            (false, true) => only_b += 1,
            _ => {}
        }
    }
    if seen == 0 {
        return Err(Error::EmptyMask);
    }
    Ok((only_a, only_b))
}

/// Exact paired comparison straight from rasters; see [`mcnemar`].
pub fn mcnemar_paired(
    pred_a: &BinaryGrid,
    pred_b: &BinaryGrid,
    truth: &BinaryGrid,
    mask: &BinaryGrid,
) -> Result<f64> {
    let (b, c) = discordant_counts(pred_a, pred_b, truth, mask)?;
    Ok(mcnemar(b, c))
}

/// Holm-Bonferroni step-down procedure. Returns, in input order, whether
/// each hypothesis is rejected at family-wise error rate `fwer`.
///
/// P-values are visited smallest first against thresholds fwer/m,
/// fwer/(m-1), ..., fwer; the first failure stops all further rejections.
pub fn holm_bonferroni(p_values: &[f64], fwer: f64) -> Result<Vec<bool>> {
    if !(fwer > 0.0 && fwer < 1.0) {
        return Err(Error::InvalidConfig(format!("fwer {fwer} outside (0, 1)")));
    }
    if let Some(bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidConfig(format!("p-value {bad} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].partial_cmp(&p_values[b]).unwrap());
    let mut rejected = vec![false; m];
    for (rank, &idx) in order.iter().enumerate() {
        if p_values[idx] <= fwer / (m - rank) as f64 {
            rejected[idx] = true;
        } else {
            break;
        }
    }
    Ok(rejected)
}

/// Evaluation summary for one model, shaped for JSON reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    /// Number of evaluated (in-mask) cells.
    pub n: u64,
    pub accuracy: f64,
    /// Exact binomial confidence interval for the accuracy.
    pub acc_pi: [f64; 2],
    pub mcc: f64,
    /// Absent when the model emits hard labels only.
    pub auc: Option<f64>,
    pub counts: ConfusionCounts,
}
