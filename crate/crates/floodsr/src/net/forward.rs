//! Forward pass. Every intermediate needed by the backward pass is
//! retained in a [`ForwardTrace`], so gradients never recompute
//! activations.

use crate::raster::FractionGrid;
use crate::scalar::Scalar;
use crate::{Error, Result};

use super::ops::{bilinear_upsample, channel_attention, subpixel_rearrange, AttentionTrace};
use super::tensor::{conv2d_forward, ConvShape, Tensor};
use super::Network;

#[derive(Debug, Clone)]
pub struct BlockTrace<T> {
    /// Concatenated input fed to each in-block convolution.
    pub conv_inputs: Vec<Tensor<T>>,
    /// Post-ReLU output of each in-block convolution.
    pub conv_outputs: Vec<Tensor<T>>,
    /// Input to the 1x1 local fusion.
    pub fusion_input: Tensor<T>,
    /// Fusion plus local skip; present only when attention follows it.
    pub pre_attention: Option<Tensor<T>>,
    pub attention: Option<AttentionTrace<T>>,
    /// What the rest of the network sees from this block.
    pub output: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct UpStageTrace<T> {
    pub conv_out: Tensor<T>,
    pub rearranged: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    pub input: Tensor<T>,
    pub sfe1: Tensor<T>,
    pub sfe2: Tensor<T>,
    pub blocks: Vec<BlockTrace<T>>,
    pub global_concat: Tensor<T>,
    pub gff1: Tensor<T>,
    /// Global fusion plus the shallow skip; feeds the upsampling chain.
    pub fused: Tensor<T>,
    pub ups: Vec<UpStageTrace<T>>,
    /// Post-ReLU high-resolution features.
    pub hr: Tensor<T>,
    /// Head output plus bilinear skip, before saturation.
    pub z: Tensor<T>,
    /// Final probabilities, logistic of the softly saturated z.
    pub prob: Vec<T>,
}

/// Logit saturation bound: keeps the logistic output strictly inside (0, 1)
/// at the working precision, and inside the tightest probability clip any
/// loss applies (1e-7, so |logit| must stay below 16.1) with margin.
pub(crate) fn logit_limit<T: Scalar>() -> T {
    (T::from_f64(0.9) * -T::epsilon().ln()).min(T::from_f64(15.9))
}

/// Soft logit saturation: identity inside [-L/2, L/2], then an exponential
/// approach to the bound L. Strictly increasing with a continuous first
/// derivative, so saturated outputs always keep a usable gradient.
pub(crate) fn saturate_logit<T: Scalar>(z: T) -> T {
    let limit = logit_limit::<T>();
    let knee = limit * T::from_f64(0.5);
    let mag = z.abs();
    if mag <= knee {
        z
    } else {
        let tail = limit - knee;
        let soft = limit - tail * (-(mag - knee) / tail).exp();
        if z > T::zero() { soft } else { -soft }
    }
}

/// Derivative of the soft saturation at pre-saturation value `z`; equals 1
/// in the identity region and decays exponentially past the knee, never
/// reaching zero.
pub(crate) fn saturate_logit_deriv<T: Scalar>(z: T) -> T {
    let limit = logit_limit::<T>();
    let knee = limit * T::from_f64(0.5);
    let mag = z.abs();
    if mag <= knee {
        T::one()
    } else {
        (-(mag - knee) / (limit - knee)).exp()
    }
}

fn conv<T: Scalar>(net: &Network<T>, at: usize, input: &Tensor<T>, k: usize) -> Tensor<T> {
    let shape = ConvShape {
        in_ch: input.ch(),
        out_ch: net.b(at).len(),
        k,
    };
    conv2d_forward(input, net.w(at), net.b(at), shape)
}

/// Runs the network on one coarse water-fraction map and returns the fine
/// probability map together with the retained activations.
///
/// With all-zero parameters every convolution vanishes and the result is
/// exactly logistic(bilinear upsample of the input).
pub fn forward<T: Scalar>(
    net: &Network<T>,
    wfm: &FractionGrid<T>,
) -> Result<(FractionGrid<T>, ForwardTrace<T>)> {
    if wfm.rows() == 0 || wfm.cols() == 0 {
        return Err(Error::ShapeMismatch("empty input grid".into()));
    }
    let cfg = &net.config;
    let idx = &net.idx;
    let k = cfg.kernel;

    let input = Tensor::from_grid(wfm);
    let sfe1 = conv(net, idx.sfe1, &input, k);
    let sfe2 = conv(net, idx.sfe2, &sfe1, k);

    let mut blocks = Vec::with_capacity(cfg.blocks);
    let mut block_in = sfe2.clone();
    for b in &idx.blocks {
        let mut conv_inputs = Vec::with_capacity(cfg.layers_per_block);
        let mut conv_outputs: Vec<Tensor<T>> = Vec::with_capacity(cfg.layers_per_block);
        for (c, &at) in b.convs.iter().enumerate() {
            let cat = if c == 0 {
                block_in.clone()
            } else {
                let mut parts: Vec<&Tensor<T>> = Vec::with_capacity(c + 1);
                parts.push(&block_in);
                parts.extend(conv_outputs.iter().take(c));
                Tensor::concat(&parts)?
            };
            let mut out = conv(net, at, &cat, k);
            out.relu_inplace();
            conv_inputs.push(cat);
            conv_outputs.push(out);
        }
        let fusion_input = {
            let mut parts: Vec<&Tensor<T>> = Vec::with_capacity(cfg.layers_per_block + 1);
            parts.push(&block_in);
            parts.extend(conv_outputs.iter());
            Tensor::concat(&parts)?
        };
        let mut post_skip = conv(net, b.fusion, &fusion_input, 1);
        post_skip.add_assign(&block_in)?;

        let (pre_attention, attention, output) = match b.attention {
            Some(a) => {
                let (gated, att_trace) = channel_attention(
                    &post_skip,
                    net.w(a),
                    net.b(a),
                    net.w(a + 2),
                    net.b(a + 2),
                )?;
                (Some(post_skip), Some(att_trace), gated)
            }
            None => (None, None, post_skip),
        };
        block_in = output.clone();
        blocks.push(BlockTrace {
            conv_inputs,
            conv_outputs,
            fusion_input,
            pre_attention,
            attention,
            output,
        });
    }

    let global_concat = {
        let parts: Vec<&Tensor<T>> = blocks.iter().map(|b| &b.output).collect();
        Tensor::concat(&parts)?
    };
    let gff1 = conv(net, idx.gff1, &global_concat, 1);
    let mut fused = conv(net, idx.gff2, &gff1, k);
    fused.add_assign(&sfe1)?;

    let mut ups = Vec::with_capacity(cfg.upsample_plan.len());
    let mut cur = fused.clone();
    for (stage, &r) in cfg.upsample_plan.iter().enumerate() {
        let conv_out = conv(net, idx.ups[stage], &cur, k);
        let rearranged = subpixel_rearrange(&conv_out, r)?;
        cur = rearranged.clone();
        ups.push(UpStageTrace { conv_out, rearranged });
    }

    let mut hr = conv(net, idx.hr, &cur, k);
    hr.relu_inplace();
    let mut z = conv(net, idx.head, &hr, k);
    z.add_assign(&bilinear_upsample(wfm, cfg.scale))?;

    if z.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteActivation("pre-logistic head"));
    }

    let prob: Vec<T> = z
        .data()
        .iter()
        .map(|&v| {
            let soft = saturate_logit(v);
            T::one() / (T::one() + (-soft).exp())
        })
        .collect();
    let grid = FractionGrid::new(z.rows(), z.cols(), prob.clone())?;

    Ok((
        grid,
        ForwardTrace {
            input,
            sfe1,
            sfe2,
            blocks,
            global_concat,
            gff1,
            fused,
            ups,
            hr,
            z,
            prob,
        },
    ))
}
