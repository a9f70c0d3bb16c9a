//! Rank-3 feature tensors (channels x rows x cols) and the convolution
//! kernels behind the network.
//!
//! All reductions run in a fixed order with a fixed accumulator split, so
//! results are bit-reproducible run to run. The convolution kernels walk
//! zero-padded planes with small register tiles (a few output channels by
//! a fixed lane count) and accumulate with fused multiply-add; the tile
//! shape never depends on the data, only on compile-time constants, so the
//! summation order is stable.

use crate::raster::FractionGrid;
use crate::scalar::Scalar;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    ch: usize,
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(ch: usize, rows: usize, cols: usize) -> Self {
        Self {
            ch,
            rows,
            cols,
            data: vec![T::zero(); ch * rows * cols],
        }
    }

    pub fn from_data(ch: usize, rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != ch * rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{ch}x{rows}x{cols} tensor needs {} values, got {}",
                ch * rows * cols,
                data.len()
            )));
        }
        Ok(Self { ch, rows, cols, data })
    }

    pub fn from_grid(grid: &FractionGrid<T>) -> Self {
        Self {
            ch: 1,
            rows: grid.rows(),
            cols: grid.cols(),
            data: grid.cells().to_vec(),
        }
    }

    #[inline]
    pub fn ch(&self) -> usize {
        self.ch
    }
    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }
    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }
    /// Cells per channel.
    #[inline]
    pub fn plane(&self) -> usize {
        self.rows * self.cols
    }
    pub fn data(&self) -> &[T] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.rows + y) * self.cols + x]
    }
    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: T) {
        self.data[(c * self.rows + y) * self.cols + x] = v;
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let n = self.plane();
        &self.data[c * n..(c + 1) * n]
    }
    pub fn channel_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.plane();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Channel-wise concatenation; every part must share the spatial shape.
    pub fn concat(parts: &[&Tensor<T>]) -> Result<Self> {
        let (rows, cols) = (parts[0].rows, parts[0].cols);
        let ch = parts.iter().map(|p| p.ch).sum();
        let mut data = Vec::with_capacity(ch * rows * cols);
        for p in parts {
            if p.rows != rows || p.cols != cols {
                return Err(Error::ShapeMismatch(format!(
                    "concat of {}x{} with {}x{} planes",
                    rows, cols, p.rows, p.cols
                )));
            }
            data.extend_from_slice(&p.data);
        }
        Ok(Self { ch, rows, cols, data })
    }

    pub fn relu_inplace(&mut self) {
        for v in &mut self.data {
            if *v < T::zero() {
                *v = T::zero();
            }
        }
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) -> Result<()> {
        if self.ch != other.ch || self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!(
                "adding {}x{}x{} to {}x{}x{}",
                other.ch, other.rows, other.cols, self.ch, self.rows, self.cols
            )));
        }
        add_into(&mut self.data, &other.data);
        Ok(())
    }

    /// Single-channel tensor as a grid; the inverse of [`Tensor::from_grid`].
    pub fn into_grid(self) -> Result<FractionGrid<T>> {
        if self.ch != 1 {
            return Err(Error::ShapeMismatch(format!(
                "{}-channel tensor is not a grid",
                self.ch
            )));
        }
        FractionGrid::new(self.rows, self.cols, self.data)
    }
}

#[inline]
pub fn axpy<T: Scalar>(dst: &mut [T], w: T, src: &[T]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += w * s;
    }
}

#[inline]
pub fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Dot product with four fixed-lane accumulators: vectorizes without giving
/// the compiler freedom to reassociate, so the result is reproducible.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 4];
    let quads = a.len() / 4;
    for i in 0..quads {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = T::zero();
    for j in 4 * quads..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn sum<T: Scalar>(a: &[T]) -> T {
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

/// Same-padding stride-1 convolution geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
}

impl ConvShape {
    pub fn weight_len(&self) -> usize {
        self.out_ch * self.in_ch * self.k * self.k
    }
}

/// Columns held in registers by the convolution tiles.
const LANES: usize = 8;

/// Copy of `input` with `p` zero cells around every channel plane. The right
/// edge is padded out to a whole number of lane blocks beyond the taps, so a
/// tile that starts at any output column can always read full lane chunks;
/// lanes that land in the padding accumulate zeros and are simply not stored.
fn pad_planes<T: Scalar>(input: &Tensor<T>, p: usize) -> Tensor<T> {
    let (rows, cols) = (input.rows(), input.cols());
    let pcols = cols.div_ceil(LANES) * LANES + 2 * p;
    let mut out = Tensor::zeros(input.ch(), rows + 2 * p, pcols);
    for i in 0..input.ch() {
        let src = input.channel(i);
        let dst = out.channel_mut(i);
        for y in 0..rows {
            let d = (y + p) * pcols + p;
            dst[d..d + cols].copy_from_slice(&src[y * cols..(y + 1) * cols]);
        }
    }
    out
}

/// Accumulates `OB` output planes starting at channel `o0`, tiling rows into
/// lane-wide register blocks. `weight` is indexed `[(o*in_ch + i)*k*k + tap]`,
/// the native conv layout; passing a transposed, tap-flipped copy with the
/// gradient tensor as `padded` turns the same kernel into the input-gradient
/// pass. `OB` must be a compile-time constant so the accumulator tile stays
/// in registers.
fn conv_block<T: Scalar, const OB: usize>(
    padded: &Tensor<T>,
    weight: &[T],
    bias: &[T],
    in_ch: usize,
    k: usize,
    o0: usize,
    out: &mut Tensor<T>,
) {
    let (rows, cols) = (out.rows(), out.cols());
    let (prows, pcols) = (padded.rows(), padded.cols());
    let src = padded.data();
    let full = cols / LANES * LANES;
    for y in 0..rows {
        let mut x = 0;
        while x < full {
            let acc = conv_tile::<T, OB>(src, weight, in_ch, k, prows, pcols, o0, y, x);
            for j in 0..OB {
                let b = bias[o0 + j];
                let d = ((o0 + j) * rows + y) * cols + x;
                let dst: &mut [T; LANES] =
                    (&mut out.data_mut()[d..d + LANES]).try_into().unwrap();
                for l in 0..LANES {
                    dst[l] = b + acc[j][l];
                }
            }
            x += LANES;
        }
        if x < cols {
            // The padding extends past the last block, so the tile math is
            // identical; only the store narrows to the remaining columns.
            let acc = conv_tile::<T, OB>(src, weight, in_ch, k, prows, pcols, o0, y, x);
            for j in 0..OB {
                let b = bias[o0 + j];
                let d = ((o0 + j) * rows + y) * cols + x;
                for (l, slot) in out.data_mut()[d..d + cols - x].iter_mut().enumerate() {
                    *slot = b + acc[j][l];
                }
            }
        }
    }
}

/// One `OB` x `LANES` accumulator tile of the convolution at output position
/// (`y`, `x`), reduced over every input channel and tap in a fixed order.
#[inline(always)]
fn conv_tile<T: Scalar, const OB: usize>(
    src: &[T],
    weight: &[T],
    in_ch: usize,
    k: usize,
    prows: usize,
    pcols: usize,
    o0: usize,
    y: usize,
    x: usize,
) -> [[T; LANES]; OB] {
    let kk = k * k;
    let mut acc = [[T::zero(); LANES]; OB];
    for i in 0..in_ch {
        let base = (i * prows + y) * pcols + x;
        for ky in 0..k {
            let row = &src[base + ky * pcols..base + ky * pcols + k - 1 + LANES];
            for kx in 0..k {
                let chunk: &[T; LANES] = row[kx..kx + LANES].try_into().unwrap();
                for j in 0..OB {
                    let w = weight[((o0 + j) * in_ch + i) * kk + ky * k + kx];
                    for l in 0..LANES {
                        acc[j][l] = w.mul_add(chunk[l], acc[j][l]);
                    }
                }
            }
        }
    }
    acc
}

/// Runs [`conv_block`] over every output channel, six at a time with a
/// one-channel cleanup loop. Six output rows of lane-wide accumulators fill
/// the vector register file without spilling; eight was measurably slower.
fn conv_all_blocks<T: Scalar>(
    padded: &Tensor<T>,
    weight: &[T],
    bias: &[T],
    in_ch: usize,
    k: usize,
    out: &mut Tensor<T>,
) {
    let out_ch = out.ch();
    let mut o = 0;
    while o + 6 <= out_ch {
        conv_block::<T, 6>(padded, weight, bias, in_ch, k, o, out);
        o += 6;
    }
    while o < out_ch {
        conv_block::<T, 1>(padded, weight, bias, in_ch, k, o, out);
        o += 1;
    }
}

pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weight: &[T],
    bias: &[T],
    shape: ConvShape,
) -> Tensor<T> {
    debug_assert_eq!(input.ch(), shape.in_ch);
    debug_assert_eq!(weight.len(), shape.weight_len());
    debug_assert_eq!(bias.len(), shape.out_ch);
    let p = shape.k / 2;
    let padded_owned;
    let padded = if p == 0 && input.cols() % LANES == 0 {
        input
    } else {
        padded_owned = pad_planes(input, p);
        &padded_owned
    };
    let mut out = Tensor::zeros(shape.out_ch, input.rows(), input.cols());
    conv_all_blocks(padded, weight, bias, shape.in_ch, shape.k, &mut out);
    out
}

/// Weight gradients for the `KK = k*k` taps of the (`o`, `i`) plane pair,
/// one lane block per tap, accumulated in a single pass over the planes.
/// The tap count is a compile-time constant only to size the accumulator
/// array; the tap loops stay rolled, which profiles faster here than full
/// unrolling because the block exceeds the vector register file either way.
/// Lane sums collapse in a fixed order at the end.
fn grad_w_pair<T: Scalar, const KK: usize>(
    padded_in: &Tensor<T>,
    grad_out: &Tensor<T>,
    k: usize,
    i: usize,
    o: usize,
) -> [T; KK] {
    let (rows, cols) = (grad_out.rows(), grad_out.cols());
    let (prows, pcols) = (padded_in.rows(), padded_in.cols());
    let full = cols / LANES * LANES;
    let src = padded_in.data();
    let go = grad_out.channel(o);
    let mut lanes = [[T::zero(); LANES]; KK];
    let mut tails = [T::zero(); KK];
    for y in 0..rows {
        let grow = &go[y * cols..(y + 1) * cols];
        let base = (i * prows + y) * pcols;
        let mut x = 0;
        while x < full {
            let g: &[T; LANES] = grow[x..x + LANES].try_into().unwrap();
            for ky in 0..k {
                let row = &src[base + ky * pcols + x..base + ky * pcols + x + k - 1 + LANES];
                for kx in 0..k {
                    let chunk: &[T; LANES] = row[kx..kx + LANES].try_into().unwrap();
                    let acc = &mut lanes[ky * k + kx];
                    for l in 0..LANES {
                        acc[l] = g[l].mul_add(chunk[l], acc[l]);
                    }
                }
            }
            x += LANES;
        }
        for xx in x..cols {
            let gv = grow[xx];
            for ky in 0..k {
                for kx in 0..k {
                    let s = src[base + ky * pcols + xx + kx];
                    tails[ky * k + kx] = gv.mul_add(s, tails[ky * k + kx]);
                }
            }
        }
    }
    let mut out = [T::zero(); KK];
    for t in 0..KK {
        let l = &lanes[t];
        out[t] = ((l[0] + l[1]) + (l[2] + l[3])) + ((l[4] + l[5]) + (l[6] + l[7])) + tails[t];
    }
    out
}

fn grad_w_all<T: Scalar>(
    padded_in: &Tensor<T>,
    grad_out: &Tensor<T>,
    shape: ConvShape,
    grad_w: &mut [T],
) {
    let kk = shape.k * shape.k;
    for o in 0..shape.out_ch {
        for i in 0..shape.in_ch {
            let dst = &mut grad_w[(o * shape.in_ch + i) * kk..(o * shape.in_ch + i + 1) * kk];
            match shape.k {
                1 => dst.copy_from_slice(&grad_w_pair::<T, 1>(padded_in, grad_out, 1, i, o)),
                3 => dst.copy_from_slice(&grad_w_pair::<T, 9>(padded_in, grad_out, 3, i, o)),
                5 => dst.copy_from_slice(&grad_w_pair::<T, 25>(padded_in, grad_out, 5, i, o)),
                _ => {
                    // Odd widths beyond 5 never occur in the network; keep a
                    // straightforward fallback so the function stays total.
                    let (rows, cols) = (grad_out.rows(), grad_out.cols());
                    let (prows, pcols) = (padded_in.rows(), padded_in.cols());
                    for ky in 0..shape.k {
                        for kx in 0..shape.k {
                            let mut acc = T::zero();
                            for y in 0..rows {
                                let base = (i * prows + y + ky) * pcols + kx;
                                acc += dot(
                                    grad_out.channel(o)[y * cols..(y + 1) * cols].as_ref(),
                                    &padded_in.data()[base..base + cols],
                                );
                            }
                            dst[ky * shape.k + kx] = acc;
                        }
                    }
                }
            }
        }
    }
}

pub struct ConvGrads<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub input: Tensor<T>,
}

pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &[T],
    shape: ConvShape,
    grad_out: &Tensor<T>,
) -> ConvGrads<T> {
    debug_assert_eq!(input.ch(), shape.in_ch);
    debug_assert_eq!(grad_out.ch(), shape.out_ch);
    debug_assert_eq!(input.plane(), grad_out.plane());
    let (rows, cols) = (input.rows(), input.cols());
    let p = shape.k / 2;
    let kk = shape.k * shape.k;
    let mut grad_w = vec![T::zero(); shape.weight_len()];
    let mut grad_b = vec![T::zero(); shape.out_ch];

    for o in 0..shape.out_ch {
        grad_b[o] = sum(grad_out.channel(o));
    }

    let padded_in_owned;
    let padded_in = if p == 0 && input.cols() % LANES == 0 {
        input
    } else {
        padded_in_owned = pad_planes(input, p);
        &padded_in_owned
    };
    grad_w_all(padded_in, grad_out, shape, &mut grad_w);

    // The input gradient is the correlation of grad_out with weights
    // transposed across channels and flipped across taps, so conv_block
    // serves both directions.
    let mut wt = vec![T::zero(); weight.len()];
    for o in 0..shape.out_ch {
        for i in 0..shape.in_ch {
            for t in 0..kk {
                wt[(i * shape.out_ch + o) * kk + (kk - 1 - t)] =
                    weight[(o * shape.in_ch + i) * kk + t];
            }
        }
    }
    let padded_go_owned;
    let padded_go = if p == 0 && grad_out.cols() % LANES == 0 {
        grad_out
    } else {
        padded_go_owned = pad_planes(grad_out, p);
        &padded_go_owned
    };
    let zero_bias = vec![T::zero(); shape.in_ch];
    let mut grad_in = Tensor::zeros(shape.in_ch, rows, cols);
    conv_all_blocks(padded_go, &wt, &zero_bias, shape.out_ch, shape.k, &mut grad_in);

    ConvGrads {
        weight: grad_w,
        bias: grad_b,
        input: grad_in,
    }
}
