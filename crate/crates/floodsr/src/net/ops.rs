//! Parameter-light network operations: sub-pixel upsampling, channel
//! attention, and the bilinear input skip.

use crate::raster::FractionGrid;
use crate::scalar::Scalar;
use crate::{Error, Result};

use super::tensor::{axpy, dot, Tensor};

/// Pixel-shuffle: folds r^2 channel groups into an r-times finer plane,
/// out(c, r*y+dy, r*x+dx) = in(c*r^2 + dy*r + dx, y, x). A bijection on the
/// stored values.
pub fn subpixel_rearrange<T: Scalar>(input: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let r2 = r * r;
    if r == 0 || input.ch() % r2 != 0 {
        return Err(Error::ChannelIndivisible {
            channels: input.ch(),
            divisor: r2,
        });
    }
    let (rows, cols) = (input.rows(), input.cols());
    let out_ch = input.ch() / r2;
    let mut out = Tensor::zeros(out_ch, rows * r, cols * r);
    for c in 0..out_ch {
        for dy in 0..r {
            for dx in 0..r {
                let src = input.channel(c * r2 + dy * r + dx);
                for y in 0..rows {
                    for x in 0..cols {
                        out.set(c, r * y + dy, r * x + dx, src[y * cols + x]);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`subpixel_rearrange`]: routes fine-plane gradients back to
/// the channel groups they came from (the inverse permutation).
pub fn subpixel_rearrange_backward<T: Scalar>(grad_out: &Tensor<T>, r: usize) -> Tensor<T> {
    let r2 = r * r;
    let rows = grad_out.rows() / r;
    let cols = grad_out.cols() / r;
    let mut grad_in = Tensor::zeros(grad_out.ch() * r2, rows, cols);
    for c in 0..grad_out.ch() {
        for dy in 0..r {
            for dx in 0..r {
                let dst = grad_in.channel_mut(c * r2 + dy * r + dx);
                for y in 0..rows {
                    for x in 0..cols {
                        dst[y * cols + x] = grad_out.at(c, r * y + dy, r * x + dx);
                    }
                }
            }
        }
    }
    grad_in
}

fn logistic<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

/// Intermediates retained for the attention backward pass.
#[derive(Debug, Clone)]
pub struct AttentionTrace<T> {
    /// Per-channel spatial means.
    pub pooled: Vec<T>,
    /// Bottleneck activations, post-ReLU.
    pub hidden: Vec<T>,
    /// Logistic gates in (0, 1).
    pub gate: Vec<T>,
}

/// Squeeze-and-excitation gate: global average pool, a two-layer bottleneck
/// (ReLU then logistic), and a per-channel multiply. With all-zero weights
/// every gate is logistic(0) = 1/2.
pub fn channel_attention<T: Scalar>(
    input: &Tensor<T>,
    w1: &[T],
    b1: &[T],
    w2: &[T],
    b2: &[T],
) -> Result<(Tensor<T>, AttentionTrace<T>)> {
    let ch = input.ch();
    let hidden = b1.len();
    if w1.len() != hidden * ch || w2.len() != ch * hidden || b2.len() != ch || hidden == 0 {
        return Err(Error::ShapeMismatch(format!(
            "attention bottleneck {hidden} over {ch} channels: w1 {} b1 {} w2 {} b2 {}",
            w1.len(),
            b1.len(),
            w2.len(),
            b2.len()
        )));
    }
    let inv_n = T::one() / T::from_usize(input.plane());
    let pooled: Vec<T> = (0..ch).map(|c| dot_ones(input.channel(c)) * inv_n).collect();
    let hidden_act: Vec<T> = (0..hidden)
        .map(|h| {
            let z = dot(&w1[h * ch..(h + 1) * ch], &pooled) + b1[h];
            if z > T::zero() {
                z
            } else {
                T::zero()
            }
        })
        .collect();
    let gate: Vec<T> = (0..ch)
        .map(|c| logistic(dot(&w2[c * hidden..(c + 1) * hidden], &hidden_act) + b2[c]))
        .collect();

    let mut out = input.clone();
    for c in 0..ch {
        let g = gate[c];
        for v in out.channel_mut(c) {
            *v = *v * g;
        }
    }
    Ok((
        out,
        AttentionTrace {
            pooled,
            hidden: hidden_act,
            gate,
        },
    ))
}

pub struct AttentionGrads<T> {
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: Vec<T>,
    pub input: Tensor<T>,
}

/// Gradients flow along both routes: directly through the gate multiply,
/// and through the gate itself via the pooled means.
pub fn channel_attention_backward<T: Scalar>(
    input: &Tensor<T>,
    w1: &[T],
    w2: &[T],
    trace: &AttentionTrace<T>,
    grad_out: &Tensor<T>,
) -> AttentionGrads<T> {
    let ch = input.ch();
    let hidden = trace.hidden.len();
    let n = input.plane();
    let inv_n = T::one() / T::from_usize(n);

    // Route 1: d(out)/d(input) at fixed gate.
    let mut grad_in = Tensor::zeros(ch, input.rows(), input.cols());
    for c in 0..ch {
        axpy(grad_in.channel_mut(c), trace.gate[c], grad_out.channel(c));
    }

    // Route 2: through the gate. dL/d(gate_c) = <grad_out_c, input_c>.
    let grad_gate: Vec<T> = (0..ch)
        .map(|c| dot(grad_out.channel(c), input.channel(c)))
        .collect();
    let grad_z2: Vec<T> = (0..ch)
        .map(|c| grad_gate[c] * trace.gate[c] * (T::one() - trace.gate[c]))
        .collect();

    let mut grad_w2 = vec![T::zero(); ch * hidden];
    for c in 0..ch {
        axpy(&mut grad_w2[c * hidden..(c + 1) * hidden], grad_z2[c], &trace.hidden);
    }
    let grad_b2 = grad_z2.clone();

    let mut grad_hidden = vec![T::zero(); hidden];
    for c in 0..ch {
        axpy(&mut grad_hidden, grad_z2[c], &w2[c * hidden..(c + 1) * hidden]);
    }
    let grad_z1: Vec<T> = (0..hidden)
        .map(|h| {
            if trace.hidden[h] > T::zero() {
                grad_hidden[h]
            } else {
                T::zero()
            }
        })
        .collect();

    let mut grad_w1 = vec![T::zero(); hidden * ch];
    for h in 0..hidden {
        axpy(&mut grad_w1[h * ch..(h + 1) * ch], grad_z1[h], &trace.pooled);
    }
    let grad_b1 = grad_z1.clone();

    let mut grad_pooled = vec![T::zero(); ch];
    for h in 0..hidden {
        axpy(&mut grad_pooled, grad_z1[h], &w1[h * ch..(h + 1) * ch]);
    }
    // Pooling spreads each channel's gradient uniformly over its plane.
    for c in 0..ch {
        let g = grad_pooled[c] * inv_n;
        for v in grad_in.channel_mut(c) {
            *v += g;
        }
    }

    AttentionGrads {
        w1: grad_w1,
        b1: grad_b1,
        w2: grad_w2,
        b2: grad_b2,
        input: grad_in,
    }
}

fn dot_ones<T: Scalar>(a: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let quads = a.len() / 4;
    for i in 0..quads {
        let j = 4 * i;
        acc[0] += a[j];
        acc[1] += a[j + 1];
        acc[2] += a[j + 2];
        acc[3] += a[j + 3];
    }
    let mut tail = T::zero();
    for j in 4 * quads..a.len() {
        tail += a[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Center-aligned bilinear upsampling of a single-channel grid by an
/// integer factor, with clamp-to-edge at the borders. This is the
/// parameter-free skip connection carrying the coarse water fractions to
/// the fine grid.
pub fn bilinear_upsample<T: Scalar>(grid: &FractionGrid<T>, f: usize) -> Tensor<T> {
    let (rows, cols) = (grid.rows(), grid.cols());
    let (out_rows, out_cols) = (rows * f, cols * f);
    let taps = |len: usize, out: usize| -> (usize, usize, T) {
        let src = (T::from_usize(2 * out + 1) / T::from_usize(2 * f)) - T::from_f64(0.5);
        let floor = src.floor();
        let i0 = (floor.max(T::zero()).as_f64() as usize).min(len - 1);
        let i1 = (i0 + 1).min(len - 1);
        // Clamp-to-edge: below the first center all weight stays on it.
        if floor < T::zero() {
            (i0, i1, T::zero())
        } else {
            (i0, i1, src - floor)
        }
    };
    let row_taps: Vec<(usize, usize, T)> = (0..out_rows).map(|y| taps(rows, y)).collect();
    let col_taps: Vec<(usize, usize, T)> = (0..out_cols).map(|x| taps(cols, x)).collect();

    let mut out = Tensor::zeros(1, out_rows, out_cols);
    for (y, &(y0, y1, fy)) in row_taps.iter().enumerate() {
        for (x, &(x0, x1, fx)) in col_taps.iter().enumerate() {
            let top = grid.get(y0, x0) * (T::one() - fx) + grid.get(y0, x1) * fx;
            let bottom = grid.get(y1, x0) * (T::one() - fx) + grid.get(y1, x1) * fx;
            out.set(0, y, x, top * (T::one() - fy) + bottom * fy);
        }
    }
    out
}
