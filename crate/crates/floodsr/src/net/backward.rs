//! Reverse-mode gradients over the retained forward trace.
//!
//! The pass walks the forward graph backwards: head, upsampling chain,
//! global fusion, then blocks in reverse with their dense connections, and
//! finally the shallow convolutions. Parameter tensors are written at the
//! same canonical indices the forward pass reads.

use crate::raster::FractionGrid;
use crate::scalar::Scalar;
use crate::{Error, Result};

use super::forward::{saturate_logit_deriv, ForwardTrace};
use super::ops::{channel_attention_backward, subpixel_rearrange_backward};
use super::tensor::{add_into, conv2d_backward, ConvGrads, ConvShape, Tensor};
use super::{Gradients, Network};

fn conv_bwd<T: Scalar>(
    net: &Network<T>,
    at: usize,
    input: &Tensor<T>,
    k: usize,
    grad_out: &Tensor<T>,
) -> ConvGrads<T> {
    let shape = ConvShape {
        in_ch: input.ch(),
        out_ch: net.b(at).len(),
        k,
    };
    conv2d_backward(input, net.w(at), shape, grad_out)
}

fn relu_mask<T: Scalar>(grad: &mut Tensor<T>, activated: &Tensor<T>) {
    for (g, &a) in grad.data_mut().iter_mut().zip(activated.data()) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Copies `n_ch` channels starting at `from` into a standalone tensor.
fn take_channels<T: Scalar>(t: &Tensor<T>, from: usize, n_ch: usize) -> Tensor<T> {
    let mut out = Tensor::zeros(n_ch, t.rows(), t.cols());
    for c in 0..n_ch {
        out.channel_mut(c).copy_from_slice(t.channel(from + c));
    }
    out
}

/// Gradients of a scalar loss with respect to every parameter, given the
/// loss gradient with respect to the output probabilities.
///
/// The logistic and soft-saturation derivatives are applied here, matching
/// the forward head exactly.
pub fn backward<T: Scalar>(
    net: &Network<T>,
    trace: &ForwardTrace<T>,
    grad_prob: &FractionGrid<T>,
) -> Result<Gradients<T>> {
    if grad_prob.rows() != trace.z.rows() || grad_prob.cols() != trace.z.cols() {
        return Err(Error::ShapeMismatch(format!(
            "gradient {}x{} vs output {}x{}",
            grad_prob.rows(),
            grad_prob.cols(),
            trace.z.rows(),
            trace.z.cols()
        )));
    }
    let cfg = &net.config;
    let idx = &net.idx;
    let k = cfg.kernel;
    let g0 = cfg.base_features;
    let g = cfg.growth;
    let mut grads = net.zero_gradients();

    // dL/dz = dL/dS * S(1-S) * saturation slope; the slope shrinks past the
    // knee but never vanishes, so saturated cells stay trainable.
    let mut grad_z = Tensor::zeros(1, trace.z.rows(), trace.z.cols());
    for (i, gz) in grad_z.data_mut().iter_mut().enumerate() {
        let z = trace.z.data()[i];
        let s = trace.prob[i];
        *gz = grad_prob.cells()[i] * s * (T::one() - s) * saturate_logit_deriv(z);
    }

    // Head: the bilinear branch feeds from the raw input and holds no
    // parameters, so only the convolutional branch propagates.
    let head = conv_bwd(net, idx.head, &trace.hr, k, &grad_z);
    grads[idx.head] = head.weight;
    grads[idx.head + 1] = head.bias;
    let mut grad_hr = head.input;
    relu_mask(&mut grad_hr, &trace.hr);

    let hr_input = &trace.ups[cfg.upsample_plan.len() - 1].rearranged;
    let hr = conv_bwd(net, idx.hr, hr_input, k, &grad_hr);
    grads[idx.hr] = hr.weight;
    grads[idx.hr + 1] = hr.bias;

    let mut grad_stage = hr.input;
    for (stage, &r) in cfg.upsample_plan.iter().enumerate().rev() {
        let grad_conv_out = subpixel_rearrange_backward(&grad_stage, r);
        let stage_input = if stage == 0 {
            &trace.fused
        } else {
            &trace.ups[stage - 1].rearranged
        };
        let up = conv_bwd(net, idx.ups[stage], stage_input, k, &grad_conv_out);
        grads[idx.ups[stage]] = up.weight;
        grads[idx.ups[stage] + 1] = up.bias;
        grad_stage = up.input;
    }
    let grad_fused = grad_stage;

    // Global fusion; the additive skip routes a copy to the first shallow
    // feature map.
    let gff2 = conv_bwd(net, idx.gff2, &trace.gff1, k, &grad_fused);
    grads[idx.gff2] = gff2.weight;
    grads[idx.gff2 + 1] = gff2.bias;
    let gff1 = conv_bwd(net, idx.gff1, &trace.global_concat, 1, &gff2.input);
    grads[idx.gff1] = gff1.weight;
    grads[idx.gff1 + 1] = gff1.bias;
    let grad_global_concat = gff1.input;

    // Blocks in reverse; `carry` is the gradient flowing into a block's
    // output from the block above (none for the last block).
    let mut carry = Tensor::zeros(g0, trace.sfe2.rows(), trace.sfe2.cols());
    for (d, (block, bidx)) in trace.blocks.iter().zip(&idx.blocks).enumerate().rev() {
        let mut grad_output = take_channels(&grad_global_concat, d * g0, g0);
        grad_output.add_assign(&carry)?;

        let grad_post_skip = match (&block.attention, bidx.attention) {
            (Some(att_trace), Some(a)) => {
                let pre = block.pre_attention.as_ref().expect("attention retains its input");
                let att = channel_attention_backward(
                    pre,
                    net.w(a),
                    net.w(a + 2),
                    att_trace,
                    &grad_output,
                );
                grads[a] = att.w1;
                grads[a + 1] = att.b1;
                grads[a + 2] = att.w2;
                grads[a + 3] = att.b2;
                att.input
            }
            _ => grad_output,
        };

        // Local skip: the block input receives the post-skip gradient
        // directly, plus whatever flows back through the dense convs.
        let mut grad_block_in = grad_post_skip.clone();

        let fusion = conv_bwd(net, bidx.fusion, &block.fusion_input, 1, &grad_post_skip);
        grads[bidx.fusion] = fusion.weight;
        grads[bidx.fusion + 1] = fusion.bias;

        let c_layers = cfg.layers_per_block;
        let mut grad_conv_out: Vec<Tensor<T>> = (0..c_layers)
            .map(|c| take_channels(&fusion.input, g0 + c * g, g))
            .collect();
        add_into(grad_block_in.data_mut(), take_channels(&fusion.input, 0, g0).data());

        for c in (0..c_layers).rev() {
            let mut grad_out_c = grad_conv_out[c].clone();
            relu_mask(&mut grad_out_c, &block.conv_outputs[c]);
            let conv = conv_bwd(net, bidx.convs[c], &block.conv_inputs[c], k, &grad_out_c);
            grads[bidx.convs[c]] = conv.weight;
            grads[bidx.convs[c] + 1] = conv.bias;
            add_into(grad_block_in.data_mut(), take_channels(&conv.input, 0, g0).data());
            for j in 0..c {
                grad_conv_out[j].add_assign(&take_channels(&conv.input, g0 + j * g, g))?;
            }
        }
        carry = grad_block_in;
    }

    let sfe2 = conv_bwd(net, idx.sfe2, &trace.sfe1, k, &carry);
    grads[idx.sfe2] = sfe2.weight;
    grads[idx.sfe2 + 1] = sfe2.bias;
    let mut grad_sfe1 = sfe2.input;
    grad_sfe1.add_assign(&grad_fused)?;

    let sfe1 = conv_bwd(net, idx.sfe1, &trace.input, k, &grad_sfe1);
    grads[idx.sfe1] = sfe1.weight;
    grads[idx.sfe1 + 1] = sfe1.bias;

    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::forward::forward;
    use crate::net::{init_params, NetConfig};

    fn tiny_config() -> NetConfig {
        NetConfig {
            scale: 10,
            base_features: 4,
            blocks: 2,
            layers_per_block: 2,
            growth: 4,
            kernel: 3,
            attention: true,
            attention_reduction: 2,
            upsample_plan: vec![2, 5],
        }
    }

    fn sample_wfm() -> FractionGrid<f64> {
        FractionGrid::from_fn(6, 6, |r, c| ((r * 11 + c * 5) % 9) as f64 / 9.0)
    }

    // Scalar objective L = sum of probe * prob; its analytic gradient must
    // match central finite differences on a stratified parameter sample.
    #[test]
    fn gradients_match_finite_differences_everywhere() {
        let net: Network<f64> = init_params(&tiny_config(), 17).unwrap();
        let wfm = sample_wfm();
        let probe =
            FractionGrid::from_fn(60, 60, |r, c| (((r + 2 * c) % 7) as f64 / 7.0) - 0.45);

        let objective = |net: &Network<f64>| -> f64 {
            let (prob, _) = forward(net, &wfm).unwrap();
            prob.cells()
                .iter()
                .zip(probe.cells())
                .map(|(p, q)| p * q)
                .sum()
        };

        let (_, trace) = forward(&net, &wfm).unwrap();
        let grads = backward(&net, &trace, &probe).unwrap();

        let h = 1e-5;
        let mut checked = 0;
        for t in 0..net.params.len() {
            let len = net.params[t].len();
            // Probe a few spread-out entries in every tensor.
            for &i in &[0usize, len / 2, len.saturating_sub(1)] {
                let mut plus = net.clone();
                plus.params[t][i] += h;
                let mut minus = net.clone();
                minus.params[t][i] -= h;
                let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
                let analytic = grads[t][i];
                let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-6);
                assert!(
                    rel < 1e-4,
                    "tensor {t} elem {i}: analytic {analytic:.6e} vs fd {fd:.6e} (rel {rel:.2e})"
                );
                checked += 1;
            }
        }
        assert!(checked >= 3 * net.params.len());
    }

    #[test]
    fn backward_is_deterministic() {
        let net: Network<f64> = init_params(&tiny_config(), 23).unwrap();
        let wfm = sample_wfm();
        let probe = FractionGrid::constant(60, 60, 0.3);
        let (_, trace) = forward(&net, &wfm).unwrap();
        let a = backward(&net, &trace, &probe).unwrap();
        let b = backward(&net, &trace, &probe).unwrap();
        for (ta, tb) in a.iter().zip(&b) {
            for (x, y) in ta.iter().zip(tb) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    // Wall-clock probe for the default configuration; run explicitly with
    // `cargo test --release -- --ignored step_timing`.
    fn time_step<T: crate::scalar::Scalar>(label: &str) {
        let net: Network<T> = init_params(&NetConfig::default(), 1).unwrap();
        let wfm = FractionGrid::from_fn(10, 10, |r, c| {
            T::from_f64(((r * 7 + c) % 10) as f64 / 10.0)
        });
        let probe = FractionGrid::constant(100, 100, T::from_f64(1e-4));
        // Warm up, then time a handful of full steps.
        let (_, trace) = forward(&net, &wfm).unwrap();
        let _ = backward(&net, &trace, &probe).unwrap();
        let n = 10;
        let start = std::time::Instant::now();
        for _ in 0..n {
            let (_, trace) = forward(&net, &wfm).unwrap();
            let _ = backward(&net, &trace, &probe).unwrap();
        }
        let per = start.elapsed() / n;
        eprintln!("{label} fwd+bwd tile step: {per:?}");
    }

    #[test]
    #[ignore]
    fn step_timing() {
        time_step::<f64>("f64");
        time_step::<f32>("f32");
    }

    #[test]
    fn gradient_shape_mismatch_is_rejected() {
        let net: Network<f64> = init_params(&tiny_config(), 3).unwrap();
        let wfm = sample_wfm();
        let (_, trace) = forward(&net, &wfm).unwrap();
        let bad = FractionGrid::<f64>::zeros(10, 10);
        assert!(matches!(
            backward(&net, &trace, &bad),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
