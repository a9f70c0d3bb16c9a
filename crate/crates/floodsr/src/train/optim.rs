//! Bias-corrected Adam over the network's tensor list.

use crate::net::{Gradients, Network};
use crate::scalar::Scalar;

/// First and second gradient moments, one buffer per parameter tensor,
/// plus the step counter driving bias correction.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: u32,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(net: &Network<T>, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            m: net.zero_gradients(),
            v: net.zero_gradients(),
            step: 0,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn step_count(&self) -> u32 {
        self.step
    }
}

/// One Adam update of `params` in place. Layouts of params, grads, and
/// state must agree; they all come from the same network.
pub fn adam_step<T: Scalar>(
    params: &mut [Vec<T>],
    grads: &Gradients<T>,
    state: &mut AdamState<T>,
    lr: f64,
) {
    state.step += 1;
    let b1 = T::from_f64(state.beta1);
    let b2 = T::from_f64(state.beta2);
    let one = T::one();
    // Fold the bias corrections into the step size and the eps offset so the
    // inner loop stays a single fused expression per element.
    let bc1 = 1.0 - state.beta1.powi(state.step as i32);
    let bc2 = 1.0 - state.beta2.powi(state.step as i32);
    let alpha = T::from_f64(lr * bc2.sqrt() / bc1);
    let eps_hat = T::from_f64(state.eps * bc2.sqrt());

    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        debug_assert_eq!(p.len(), g.len());
        for k in 0..p.len() {
            m[k] = b1 * m[k] + (one - b1) * g[k];
            v[k] = b2 * v[k] + (one - b2) * g[k] * g[k];
            p[k] = p[k] - alpha * m[k] / (v[k].sqrt() + eps_hat);
        }
    }
}
