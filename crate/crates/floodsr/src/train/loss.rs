//! Penalized average cross-entropy: pixel-wise binary cross-entropy against
//! the truth map plus an eta-weighted squared deviation between predicted
//! patch fractions and the coarse water-fraction target.

use crate::net::{backward, forward, Gradients, Network};
use crate::raster::{BinaryGrid, FractionGrid};
use crate::scalar::Scalar;
use crate::wfm::ScaleFactor;
use crate::{Error, Result};

/// Probabilities are pulled into [eps, 1-eps] before any logarithm; the
/// displayed loss never addresses log(0).
pub const DEFAULT_CLIP_EPS: f64 = 1e-7;

/// The two loss terms and their weighted sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown<T> {
    /// Mean negative log-likelihood over all fine-resolution pixels.
    pub ace: T,
    /// Unnormalized sum of squared patch-fraction deviations.
    pub penalty: T,
    pub eta: T,
    /// ace + eta * penalty.
    pub total: T,
}

impl<T: Scalar> LossBreakdown<T> {
    fn new(ace: T, penalty: T, eta: T) -> Self {
        Self {
            ace,
            penalty,
            eta,
            total: ace + eta * penalty,
        }
    }
}

fn check_shapes<T: Scalar>(
    truth: &BinaryGrid,
    probs: &FractionGrid<T>,
    wfm: &FractionGrid<T>,
    f: usize,
) -> Result<()> {
    if probs.rows() != truth.rows() || probs.cols() != truth.cols() {
        return Err(Error::ShapeMismatch(format!(
            "probabilities {}x{} vs truth {}x{}",
            probs.rows(),
            probs.cols(),
            truth.rows(),
            truth.cols()
        )));
    }
    if truth.rows() != wfm.rows() * f || truth.cols() != wfm.cols() * f {
        return Err(Error::ShapeMismatch(format!(
            "truth {}x{} is not {f}x the fraction map {}x{}",
            truth.rows(),
            truth.cols(),
            wfm.rows(),
            wfm.cols()
        )));
    }
    if truth.rows() == 0 || truth.cols() == 0 {
        return Err(Error::ShapeMismatch("empty grids".into()));
    }
    Ok(())
}

/// Mean of the f×f patch of `cells` anchored at (f·i, f·j), accumulated in
/// row-major order so the result is bit-reproducible.
#[inline]
fn patch_mean<T: Scalar>(cells: &[T], cols: usize, f: usize, i: usize, j: usize) -> T {
    let mut sum = T::zero();
    for dy in 0..f {
        let start = (i * f + dy) * cols + j * f;
        for &v in &cells[start..start + f] {
            sum += v;
        }
    }
    sum / T::from_usize(f * f)
}

/// Loss of predicted probabilities `probs` against the binary `truth` and
/// the fraction target `wfm`, with probabilities clipped to
/// [clip_eps, 1-clip_eps] in both terms.
pub fn loss_pace<T: Scalar>(
    truth: &BinaryGrid,
    probs: &FractionGrid<T>,
    wfm: &FractionGrid<T>,
    eta: T,
    f: ScaleFactor,
    clip_eps: T,
) -> Result<LossBreakdown<T>> {
    let f = f.get();
    check_shapes(truth, probs, wfm, f)?;
    let lo = clip_eps;
    let hi = T::one() - clip_eps;

    let mut ll = T::zero();
    for (&y, &s) in truth.cells().iter().zip(probs.cells()) {
        let sc = s.max(lo).min(hi);
        ll += if y == 1 { sc.ln() } else { (T::one() - sc).ln() };
    }
    let ace = -ll / T::from_usize(truth.rows() * truth.cols());

    let mut penalty = T::zero();
    let clipped: Vec<T> = probs.cells().iter().map(|&s| s.max(lo).min(hi)).collect();
    for i in 0..wfm.rows() {
        for j in 0..wfm.cols() {
            let d = wfm.get(i, j) - patch_mean(&clipped, probs.cols(), f, i, j);
            penalty += d * d;
        }
    }
    Ok(LossBreakdown::new(ace, penalty, eta))
}

/// Loss plus its gradient with respect to each probability. Cells whose raw
/// probability falls outside the clip interval contribute zero gradient,
/// mirroring the flat clipped region.
pub fn loss_pace_grad<T: Scalar>(
    truth: &BinaryGrid,
    probs: &FractionGrid<T>,
    wfm: &FractionGrid<T>,
    eta: T,
    f: ScaleFactor,
    clip_eps: T,
) -> Result<(LossBreakdown<T>, FractionGrid<T>)> {
    let f = f.get();
    check_shapes(truth, probs, wfm, f)?;
    let lo = clip_eps;
    let hi = T::one() - clip_eps;
    let n = T::from_usize(truth.rows() * truth.cols());
    let inv_f2 = (T::from_usize(f * f)).recip();

    let clipped: Vec<T> = probs.cells().iter().map(|&s| s.max(lo).min(hi)).collect();

    let mut ll = T::zero();
    let mut grad = FractionGrid::zeros(probs.rows(), probs.cols());
    for (k, (&y, &sc)) in truth.cells().iter().zip(&clipped).enumerate() {
        if y == 1 {
            ll += sc.ln();
            grad.cells_mut()[k] = -(n * sc).recip();
        } else {
            ll += (T::one() - sc).ln();
            grad.cells_mut()[k] = (n * (T::one() - sc)).recip();
        }
    }
    let ace = -ll / n;

    let mut penalty = T::zero();
    for i in 0..wfm.rows() {
        for j in 0..wfm.cols() {
            let d = wfm.get(i, j) - patch_mean(&clipped, probs.cols(), f, i, j);
            penalty += d * d;
            let dpen = -(d + d) * inv_f2 * eta;
            for dy in 0..f {
                let start = (i * f + dy) * probs.cols() + j * f;
                for g in &mut grad.cells_mut()[start..start + f] {
                    *g += dpen;
                }
            }
        }
    }

    // The clip is flat outside [lo, hi]; gradients survive exactly at the
    // boundary values, consistent with the forward clamp convention.
    for (g, &s) in grad.cells_mut().iter_mut().zip(probs.cells()) {
        if s < lo || s > hi {
            *g = T::zero();
        }
    }
    Ok((LossBreakdown::new(ace, penalty, eta), grad))
}

/// Full training gradient for one tile: forward pass, loss against the
/// tile's truth map, and reverse accumulation into every parameter tensor.
/// The coarse fraction map is both the network input and the penalty target.
pub fn grad_loss<T: Scalar>(
    net: &Network<T>,
    truth: &BinaryGrid,
    wfm: &FractionGrid<T>,
    eta: T,
    clip_eps: T,
) -> Result<(LossBreakdown<T>, Gradients<T>)> {
    let f = ScaleFactor::new(net.config.scale)?;
    let (probs, trace) = forward(net, wfm)?;
    let (loss, dls) = loss_pace_grad(truth, &probs, wfm, eta, f, clip_eps)?;
    let grads = backward(net, &trace, &dls)?;
    Ok((loss, grads))
}
