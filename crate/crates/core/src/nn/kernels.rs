//! Convolution, activation and pooling kernels shared by forward and backward
//! passes. All spatial shifts use zero padding.

use rayon::prelude::*;

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// `out[y][x] += weight * inp[y + oy][x + ox]` wherever the source exists.
#[allow(clippy::too_many_arguments)]
pub(crate) fn axpy_shifted<T: Scalar>(
    out: &mut [T],
    (ho, wo): (usize, usize),
    inp: &[T],
    (hi, wi): (usize, usize),
    weight: T,
    oy: isize,
    ox: isize,
) {
    let y0 = (-oy).max(0) as usize;
    let y1 = (hi as isize - oy).clamp(0, ho as isize) as usize;
    let x0 = (-ox).max(0) as usize;
    let x1 = (wi as isize - ox).clamp(0, wo as isize) as usize;
    if y0 >= y1 || x0 >= x1 {
        return;
    }
    let n = x1 - x0;
    for y in y0..y1 {
        let src_row = (y as isize + oy) as usize;
        let src = &inp[src_row * wi + (x0 as isize + ox) as usize..][..n];
        let dst = &mut out[y * wo + x0..][..n];
        for (d, s) in dst.iter_mut().zip(src) {
            *d = *d + weight * *s;
        }
    }
}

/// `sum over y, x of a[y][x] * b[y + oy][x + ox]`.
pub(crate) fn dot_shifted<T: Scalar>(
    a: &[T],
    (ha, wa): (usize, usize),
    b: &[T],
    (hb, wb): (usize, usize),
    oy: isize,
    ox: isize,
) -> T {
    let y0 = (-oy).max(0) as usize;
    let y1 = (hb as isize - oy).clamp(0, ha as isize) as usize;
    let x0 = (-ox).max(0) as usize;
    let x1 = (wb as isize - ox).clamp(0, wa as isize) as usize;
    if y0 >= y1 || x0 >= x1 {
        return T::zero();
    }
    let n = x1 - x0;
    let mut total = T::zero();
    for y in y0..y1 {
        let ra = &a[y * wa + x0..][..n];
        let rb = &b[(y as isize + oy) as usize * wb + (x0 as isize + ox) as usize..][..n];
        total = total + dot(ra, rb);
    }
    total
}

/// Eight-lane dot product; the lane split keeps the reduction order fixed.
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] = acc[k] + x[k] * y[k];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ra.iter().zip(rb) {
        tail = tail + *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Geometry of one (possibly dilated) convolution over `[c, h, w]` input.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub in_c: usize,
    pub out_c: usize,
    pub h_in: usize,
    pub w_in: usize,
    pub h_out: usize,
    pub w_out: usize,
    pub kernel: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl ConvGeom {
    pub fn new(
        input: (usize, usize, usize),
        out_c: usize,
        kernel: usize,
        padding: usize,
        dilation: usize,
    ) -> Result<Self> {
        let (in_c, h_in, w_in) = input;
        let span = dilation * (kernel - 1);
        let h_out = (h_in + 2 * padding).checked_sub(span);
        let w_out = (w_in + 2 * padding).checked_sub(span);
        match (h_out, w_out) {
            (Some(h_out), Some(w_out)) if h_out > 0 && w_out > 0 => Ok(ConvGeom {
                in_c,
                out_c,
                h_in,
                w_in,
                h_out,
                w_out,
                kernel,
                padding,
                dilation,
            }),
            _ => Err(Error::Shape(format!(
                "{h_in}x{w_in} input too small for kernel {kernel} dilation {dilation} padding {padding}"
            ))),
        }
    }

    fn taps(&self) -> impl Iterator<Item = (usize, isize, isize)> + '_ {
        let k = self.kernel;
        (0..k * k).map(move |t| {
            let (ky, kx) = (t / k, t % k);
            (
                t,
                (ky * self.dilation) as isize - self.padding as isize,
                (kx * self.dilation) as isize - self.padding as isize,
            )
        })
    }

    fn in_hw(&self) -> (usize, usize) {
        (self.h_in, self.w_in)
    }

    fn out_hw(&self) -> (usize, usize) {
        (self.h_out, self.w_out)
    }
}

fn for_each_plane<T: Scalar>(data: &mut [T], plane: usize, f: impl Fn(usize, &mut [T]) + Sync + Send) {
    if super::parallel_enabled() {
        data.par_chunks_mut(plane).enumerate().for_each(|(i, p)| f(i, p));
    } else {
        data.chunks_mut(plane).enumerate().for_each(|(i, p)| f(i, p));
    }
}

/// Row-major or transposed view of a dense matrix.
#[derive(Clone, Copy)]
struct Mat<'a, T> {
    data: &'a [T],
    rows: usize,
    cols: usize,
    transposed: bool,
}

impl<'a, T> Mat<'a, T> {
    fn new(data: &'a [T], rows: usize, cols: usize) -> Self {
        Mat { data, rows, cols, transposed: false }
    }

    fn t(self) -> Self {
        Mat {
            rows: self.cols,
            cols: self.rows,
            transposed: !self.transposed,
            ..self
        }
    }

    fn strides(&self) -> (isize, isize) {
        if self.transposed {
            (1, self.rows as isize)
        } else {
            (self.cols as isize, 1)
        }
    }
}

/// `c = a * b + beta * c` with `c` row-major.
fn gemm<T: Scalar>(a: Mat<T>, b: Mat<T>, beta: T, c: &mut [T]) {
    assert_eq!(a.cols, b.rows);
    assert_eq!(a.data.len(), a.rows * a.cols);
    assert_eq!(b.data.len(), b.rows * b.cols);
    assert_eq!(c.len(), a.rows * b.cols);
    if c.is_empty() {
        return;
    }
    // SAFETY: the asserts above bound every index the strides can reach.
    unsafe {
        T::gemm_raw(
            a.rows,
            a.cols,
            b.cols,
            a.data.as_ptr(),
            a.strides(),
            b.data.as_ptr(),
            b.strides(),
            beta,
            c.as_mut_ptr(),
            (b.cols as isize, 1),
        )
    }
}

/// Unrolled input: row `i * k * k + tap` holds input channel `i` shifted by
/// that tap, laid out over output pixels.
fn im2col<T: Scalar>(input: &[T], g: &ConvGeom) -> Vec<T> {
    let plane_in = g.h_in * g.w_in;
    let plane_out = g.h_out * g.w_out;
    let kk = g.kernel * g.kernel;
    let mut col = vec![T::zero(); g.in_c * kk * plane_out];
    for i in 0..g.in_c {
        let src = &input[i * plane_in..(i + 1) * plane_in];
        for (t, oy, ox) in g.taps() {
            let row = &mut col[(i * kk + t) * plane_out..][..plane_out];
            axpy_shifted(row, g.out_hw(), src, g.in_hw(), T::one(), oy, ox);
        }
    }
    col
}

fn is_pointwise(g: &ConvGeom) -> bool {
    g.kernel == 1 && g.padding == 0 && g.h_in == g.h_out && g.w_in == g.w_out
}

/// Dense convolution: weight `[out, in, k, k]`, bias `[out]`.
pub(crate) fn conv_forward<T: Scalar>(input: &[T], weight: &[T], bias: &[T], g: &ConvGeom) -> Vec<T> {
    let plane_out = g.h_out * g.w_out;
    let k = g.in_c * g.kernel * g.kernel;
    let col;
    let cols: &[T] = if is_pointwise(g) {
        input
    } else {
        col = im2col(input, g);
        &col
    };
    let mut out = vec![T::zero(); g.out_c * plane_out];
    for (o, plane) in out.chunks_mut(plane_out).enumerate() {
        plane.iter_mut().for_each(|v| *v = bias[o]);
    }
    gemm(Mat::new(weight, g.out_c, k), Mat::new(cols, k, plane_out), T::one(), &mut out);
    out
}

/// Accumulates dense-convolution gradients and returns the input gradient.
pub(crate) fn conv_backward<T: Scalar>(
    input: &[T],
    weight: &[T],
    grad_out: &[T],
    g: &ConvGeom,
    grad_weight: &mut [T],
    grad_bias: &mut [T],
) -> Vec<T> {
    let plane_in = g.h_in * g.w_in;
    let plane_out = g.h_out * g.w_out;
    let kk = g.kernel * g.kernel;
    let k = g.in_c * kk;
    for o in 0..g.out_c {
        let go = &grad_out[o * plane_out..(o + 1) * plane_out];
        grad_bias[o] = grad_bias[o] + go.iter().copied().sum::<T>();
    }
    let go = Mat::new(grad_out, g.out_c, plane_out);
    let w = Mat::new(weight, g.out_c, k);
    if is_pointwise(g) {
        gemm(go, Mat::new(input, k, plane_out).t(), T::one(), grad_weight);
        let mut grad_in = vec![T::zero(); g.in_c * plane_in];
        gemm(w.t(), go, T::zero(), &mut grad_in);
        return grad_in;
    }
    let col = im2col(input, g);
    gemm(go, Mat::new(&col, k, plane_out).t(), T::one(), grad_weight);
    let mut grad_col = col;
    gemm(w.t(), go, T::zero(), &mut grad_col);
    let mut grad_in = vec![T::zero(); g.in_c * plane_in];
    for i in 0..g.in_c {
        let gi = &mut grad_in[i * plane_in..(i + 1) * plane_in];
        for (t, oy, ox) in g.taps() {
            let row = &grad_col[(i * kk + t) * plane_out..][..plane_out];
            axpy_shifted(gi, g.in_hw(), row, g.out_hw(), T::one(), -oy, -ox);
        }
    }
    grad_in
}

/// Per-channel convolution: weight `[c, 1, k, k]`, bias `[c]`.
pub(crate) fn depthwise_forward<T: Scalar>(input: &[T], weight: &[T], bias: &[T], g: &ConvGeom) -> Vec<T> {
    let plane_in = g.h_in * g.w_in;
    let plane_out = g.h_out * g.w_out;
    let kk = g.kernel * g.kernel;
    let mut out = vec![T::zero(); g.in_c * plane_out];
    for_each_plane(&mut out, plane_out, |c, dst| {
        dst.iter_mut().for_each(|v| *v = bias[c]);
        let src = &input[c * plane_in..(c + 1) * plane_in];
        for (t, oy, ox) in g.taps() {
            axpy_shifted(dst, g.out_hw(), src, g.in_hw(), weight[c * kk + t], oy, ox);
        }
    });
    out
}

pub(crate) fn depthwise_backward<T: Scalar>(
    input: &[T],
    weight: &[T],
    grad_out: &[T],
    g: &ConvGeom,
    grad_weight: &mut [T],
    grad_bias: &mut [T],
) -> Vec<T> {
    let plane_in = g.h_in * g.w_in;
    let plane_out = g.h_out * g.w_out;
    let kk = g.kernel * g.kernel;
    let mut grad_in = vec![T::zero(); g.in_c * plane_in];
    for c in 0..g.in_c {
        let go = &grad_out[c * plane_out..(c + 1) * plane_out];
        let src = &input[c * plane_in..(c + 1) * plane_in];
        grad_bias[c] = grad_bias[c] + go.iter().copied().sum::<T>();
        let gi = &mut grad_in[c * plane_in..(c + 1) * plane_in];
        for (t, oy, ox) in g.taps() {
            let d = dot_shifted(go, g.out_hw(), src, g.in_hw(), oy, ox);
            grad_weight[c * kk + t] = grad_weight[c * kk + t] + d;
            axpy_shifted(gi, g.in_hw(), go, g.out_hw(), weight[c * kk + t], -oy, -ox);
        }
    }
    grad_in
}

/// Elementwise `max(0, x)`.
pub fn relu<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
    let data = t.data().iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect();
    Tensor::from_vec(t.dims(), data).expect("same dims")
}

/// Gradient of [`relu`]; the subgradient at exactly zero is zero.
pub(crate) fn relu_backward<T: Scalar>(input: &[T], grad_out: &[T]) -> Vec<T> {
    input
        .iter()
        .zip(grad_out)
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect()
}

/// Per-channel maximum over every spatial position: `[c, h, w] -> [c, 1, 1]`.
/// The returned indices point at the first maximum in row-major order.
pub fn global_maxpool<T: Scalar>(t: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
    let (c, h, w) = t.chw()?;
    if h == 0 || w == 0 {
        return Err(Error::Shape("max pool over an empty plane".into()));
    }
    let mut vals = Vec::with_capacity(c);
    let mut idx = Vec::with_capacity(c);
    for ch in 0..c {
        let plane = t.plane(ch);
        let (mut best, mut at) = (plane[0], 0);
        for (k, &v) in plane.iter().enumerate().skip(1) {
            if v > best {
                best = v;
                at = k;
            }
        }
        vals.push(best);
        idx.push(at);
    }
    Ok((Tensor::from_vec(&[c, 1, 1], vals)?, idx))
}

/// Channel-mixing affine map at every pixel. `weight` is `[out, in]` (or
/// `[out, in, 1, 1]`), `bias` is `[out]`.
pub fn linear_1x1<T: Scalar>(t: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (c, h, w) = t.chw()?;
    let out_c = weight.dims()[0];
    if weight.len() != out_c * c || bias.len() != out_c {
        return Err(Error::Shape(format!(
            "linear layer {:?}/{:?} does not fit {c} input channels",
            weight.dims(),
            bias.dims()
        )));
    }
    let g = ConvGeom::new((c, h, w), out_c, 1, 0, 1)?;
    Tensor::from_vec(&[out_c, h, w], conv_forward(t.data(), weight.data(), bias.data(), &g))
}
