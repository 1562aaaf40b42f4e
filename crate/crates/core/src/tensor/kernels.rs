//! Forward and backward numerical kernels on raw arrays.
//!
//! These are the only places that loop over tensor data; the tape in
//! [`super::graph`] wires them together. Parallel loops split work only along
//! independent outputs (batch items, output rows), so every reduction runs in
//! a fixed order and results are bitwise reproducible.

use rayon::prelude::*;

use super::array::{numel, Array, Float};
use crate::error::{Error, Result};

const PAR_GEMM_WORK: usize = 1 << 16;

/// `c += a · b` with `a: [m,k]`, `b: [k,n]`, `c: [m,n]`, all row-major.
pub fn gemm<T: Float>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let row = |i: usize, crow: &mut [T]| {
        let arow = &a[i * k..(i + 1) * k];
        for (p, &av) in arow.iter().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    };
    if m * k * n >= PAR_GEMM_WORK && m > 1 {
        c.par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, crow)| row(i, crow));
    } else {
        c.chunks_mut(n).enumerate().for_each(|(i, crow)| row(i, crow));
    }
}

/// `c += aᵀ · b` with `a: [k,m]`, `b: [k,n]`.
pub fn gemm_tn<T: Float>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    let at = transpose(k, m, a);
    gemm(m, k, n, &at, b, c);
}

/// `c += a · bᵀ` with `a: [m,k]`, `b: [n,k]`.
pub fn gemm_nt<T: Float>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    let row = |i: usize, crow: &mut [T]| {
        let arow = &a[i * k..(i + 1) * k];
        for (j, cv) in crow.iter_mut().enumerate() {
            let brow = &b[j * k..(j + 1) * k];
            let mut s = T::zero();
            for (&x, &y) in arow.iter().zip(brow) {
                s += x * y;
            }
            *cv += s;
        }
    };
    if m * k * n >= PAR_GEMM_WORK && m > 1 {
        c.par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, crow)| row(i, crow));
    } else {
        c.chunks_mut(n).enumerate().for_each(|(i, crow)| row(i, crow));
    }
}

pub fn transpose<T: Float>(rows: usize, cols: usize, a: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

pub fn matmul<T: Float>(a: &Array<T>, b: &Array<T>) -> Result<Array<T>> {
    if a.ndim() != 2 || b.ndim() != 2 || a.shape()[1] != b.shape()[0] {
        return Err(Error::shape(
            "matmul",
            format!("cannot multiply {:?} by {:?}", a.shape(), b.shape()),
        ));
    }
    let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    let mut c = vec![T::zero(); m * n];
    gemm(m, k, n, a.data(), b.data(), &mut c);
    Array::new(&[m, n], c)
}

/// Geometry of an N-d convolution, padded internally to three spatial axes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub rank: usize,
    pub input: [usize; 3],
    pub output: [usize; 3],
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub padding: [usize; 3],
}

fn pad3(v: &[usize], fill: usize) -> [usize; 3] {
    let mut out = [fill; 3];
    let off = 3 - v.len();
    out[off..].copy_from_slice(v);
    out
}

impl ConvGeom {
    /// Geometry of a forward convolution over `input` spatial extents.
    pub fn forward(
        input: &[usize],
        kernel: &[usize],
        stride: &[usize],
        padding: &[usize],
    ) -> Result<Self> {
        let rank = input.len();
        if !(1..=3).contains(&rank)
            || kernel.len() != rank
            || stride.len() != rank
            || padding.len() != rank
        {
            return Err(Error::shape(
                "conv",
                format!(
                    "spatial rank mismatch: input {input:?}, kernel {kernel:?}, stride {stride:?}, padding {padding:?}"
                ),
            ));
        }
        if stride.contains(&0) {
            return Err(Error::InvalidArgument("conv stride must be positive".into()));
        }
        let mut output = Vec::with_capacity(rank);
        for i in 0..rank {
            let span = input[i] + 2 * padding[i];
            if span < kernel[i] {
                return Err(Error::shape(
                    "conv",
                    format!(
                        "non-positive output extent on axis {i}: input {input:?}, kernel {kernel:?}, padding {padding:?}"
                    ),
                ));
            }
            output.push((span - kernel[i]) / stride[i] + 1);
        }
        Ok(Self {
            rank,
            input: pad3(input, 1),
            output: pad3(&output, 1),
            kernel: pad3(kernel, 1),
            stride: pad3(stride, 1),
            padding: pad3(padding, 0),
        })
    }

    /// Geometry of a transposed convolution whose small side is `input`.
    ///
    /// The returned geometry describes the adjoint forward convolution, so its
    /// `input` field is the transposed convolution's output.
    pub fn transposed(
        input: &[usize],
        kernel: &[usize],
        stride: &[usize],
        padding: &[usize],
    ) -> Result<Self> {
        let rank = input.len();
        if !(1..=3).contains(&rank)
            || kernel.len() != rank
            || stride.len() != rank
            || padding.len() != rank
        {
            return Err(Error::shape(
                "conv_transpose",
                format!("spatial rank mismatch: input {input:?}, kernel {kernel:?}"),
            ));
        }
        let mut big = Vec::with_capacity(rank);
        for i in 0..rank {
            let full = (input[i] - 1) * stride[i] + kernel[i];
            if full <= 2 * padding[i] {
                return Err(Error::shape(
                    "conv_transpose",
                    format!("non-positive output extent on axis {i} for input {input:?}"),
                ));
            }
            big.push(full - 2 * padding[i]);
        }
        let g = Self::forward(&big, kernel, stride, padding)?;
        if g.out_spatial() != input {
            return Err(Error::shape(
                "conv_transpose",
                format!("geometry does not invert: {:?} vs {input:?}", g.out_spatial()),
            ));
        }
        Ok(g)
    }

    pub fn in_spatial(&self) -> Vec<usize> {
        self.input[3 - self.rank..].to_vec()
    }

    pub fn out_spatial(&self) -> Vec<usize> {
        self.output[3 - self.rank..].to_vec()
    }

    pub fn in_vol(&self) -> usize {
        self.input.iter().product()
    }

    pub fn out_vol(&self) -> usize {
        self.output.iter().product()
    }

    pub fn kernel_vol(&self) -> usize {
        self.kernel.iter().product()
    }
}

/// Unfolds `x: [channels, *input]` into `[channels·kvol, out_vol]`.
pub fn im2col<T: Float>(x: &[T], channels: usize, g: &ConvGeom) -> Vec<T> {
    let kvol = g.kernel_vol();
    let ovol = g.out_vol();
    let ivol = g.in_vol();
    let mut col = vec![T::zero(); channels * kvol * ovol];
    let [id, ih, iw] = g.input;
    let [od, oh, ow] = g.output;
    let [kd, kh, kw] = g.kernel;
    let [sd, sh, sw] = g.stride;
    let [pd, ph, pw] = g.padding;
    for c in 0..channels {
        let xc = &x[c * ivol..(c + 1) * ivol];
        for a in 0..kd {
            for b in 0..kh {
                for e in 0..kw {
                    let row = (c * kvol) + (a * kh + b) * kw + e;
                    let dst = &mut col[row * ovol..(row + 1) * ovol];
                    for z in 0..od {
                        let zi = (z * sd + a) as isize - pd as isize;
                        if zi < 0 || zi >= id as isize {
                            continue;
                        }
                        for y in 0..oh {
                            let yi = (y * sh + b) as isize - ph as isize;
                            if yi < 0 || yi >= ih as isize {
                                continue;
                            }
                            let src_base = (zi as usize * ih + yi as usize) * iw;
                            let dst_base = (z * oh + y) * ow;
                            for xo in 0..ow {
                                let xi = (xo * sw + e) as isize - pw as isize;
                                if xi >= 0 && xi < iw as isize {
                                    dst[dst_base + xo] = xc[src_base + xi as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    col
}

/// Adjoint of [`im2col`]: scatter-adds `col` back into `x: [channels, *input]`.
pub fn col2im<T: Float>(col: &[T], channels: usize, g: &ConvGeom, x: &mut [T]) {
    let kvol = g.kernel_vol();
    let ovol = g.out_vol();
    let ivol = g.in_vol();
    let [id, ih, iw] = g.input;
    let [od, oh, ow] = g.output;
    let [kd, kh, kw] = g.kernel;
    let [sd, sh, sw] = g.stride;
    let [pd, ph, pw] = g.padding;
    for c in 0..channels {
        let xc = &mut x[c * ivol..(c + 1) * ivol];
        for a in 0..kd {
            for b in 0..kh {
                for e in 0..kw {
                    let row = (c * kvol) + (a * kh + b) * kw + e;
                    let src = &col[row * ovol..(row + 1) * ovol];
                    for z in 0..od {
                        let zi = (z * sd + a) as isize - pd as isize;
                        if zi < 0 || zi >= id as isize {
                            continue;
                        }
                        for y in 0..oh {
                            let yi = (y * sh + b) as isize - ph as isize;
                            if yi < 0 || yi >= ih as isize {
                                continue;
                            }
                            let dst_base = (zi as usize * ih + yi as usize) * iw;
                            let src_base = (z * oh + y) * ow;
                            for xo in 0..ow {
                                let xi = (xo * sw + e) as isize - pw as isize;
                                if xi >= 0 && xi < iw as isize {
                                    xc[dst_base + xi as usize] += src[src_base + xo];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

fn check_conv_operands<T: Float>(
    op: &'static str,
    x: &Array<T>,
    w: &Array<T>,
    bias: &Array<T>,
    w_in_axis: usize,
) -> Result<(usize, usize, usize)> {
    if x.ndim() < 3 || x.ndim() > 5 || w.ndim() != x.ndim() {
        return Err(Error::shape(
            op,
            format!("rank mismatch: input {:?}, weight {:?}", x.shape(), w.shape()),
        ));
    }
    let (batch, cin) = (x.shape()[0], x.shape()[1]);
    if w.shape()[w_in_axis] != cin {
        return Err(Error::shape(
            op,
            format!(
                "input channels {cin} do not match weight {:?}",
                w.shape()
            ),
        ));
    }
    let cout = w.shape()[1 - w_in_axis];
    if bias.shape() != [cout] {
        return Err(Error::shape(
            op,
            format!("bias {:?} does not match {cout} output channels", bias.shape()),
        ));
    }
    Ok((batch, cin, cout))
}

/// Saved state of a forward convolution.
pub struct ConvSaved<T> {
    pub geom: ConvGeom,
    pub cols: Vec<Vec<T>>,
}

/// Cross-correlation with zero padding. `x: [B,Cin,*sp]`, `w: [Cout,Cin,*k]`.
pub fn conv_nd<T: Float>(
    x: &Array<T>,
    w: &Array<T>,
    bias: &Array<T>,
    stride: &[usize],
    padding: &[usize],
) -> Result<(Array<T>, ConvSaved<T>)> {
    let (batch, cin, cout) = check_conv_operands("conv_nd", x, w, bias, 1)?;
    let geom = ConvGeom::forward(&x.shape()[2..], &w.shape()[2..], stride, padding)?;
    let ivol = geom.in_vol();
    let ovol = geom.out_vol();
    let kdim = cin * geom.kernel_vol();
    let mut out_shape = vec![batch, cout];
    out_shape.extend(geom.out_spatial());
    let mut y = vec![T::zero(); batch * cout * ovol];
    let cols: Vec<Vec<T>> = y
        .par_chunks_mut(cout * ovol)
        .enumerate()
        .map(|(b, yb)| {
            let col = im2col(&x.data()[b * cin * ivol..(b + 1) * cin * ivol], cin, &geom);
            for (c, chunk) in yb.chunks_mut(ovol).enumerate() {
                chunk.fill(bias.data()[c]);
            }
            gemm(cout, kdim, ovol, w.data(), &col, yb);
            col
        })
        .collect();
    Ok((Array::new(&out_shape, y)?, ConvSaved { geom, cols }))
}

/// Gradients of [`conv_nd`] with respect to input, weight and bias.
pub fn conv_nd_backward<T: Float>(
    dy: &Array<T>,
    w: &Array<T>,
    x_shape: &[usize],
    saved: &ConvSaved<T>,
) -> (Array<T>, Array<T>, Array<T>) {
    let g = &saved.geom;
    let (batch, cin) = (x_shape[0], x_shape[1]);
    let cout = w.shape()[0];
    let ovol = g.out_vol();
    let ivol = g.in_vol();
    let kdim = cin * g.kernel_vol();
    let mut dx = vec![T::zero(); batch * cin * ivol];
    let per_batch_dw: Vec<Vec<T>> = dx
        .par_chunks_mut(cin * ivol)
        .enumerate()
        .map(|(b, dxb)| {
            let dyb = &dy.data()[b * cout * ovol..(b + 1) * cout * ovol];
            let mut dw = vec![T::zero(); cout * kdim];
            gemm_nt(cout, ovol, kdim, dyb, &saved.cols[b], &mut dw);
            let mut dcol = vec![T::zero(); kdim * ovol];
            gemm_tn(kdim, cout, ovol, w.data(), dyb, &mut dcol);
            col2im(&dcol, cin, g, dxb);
            dw
        })
        .collect();
    let mut dw = vec![T::zero(); cout * kdim];
    for part in &per_batch_dw {
        for (a, &b) in dw.iter_mut().zip(part) {
            *a += b;
        }
    }
    let db = channel_sums(dy.data(), batch, cout, ovol);
    (
        Array::new(x_shape, dx).expect("dx shape"),
        Array::new(w.shape(), dw).expect("dw shape"),
        Array::new(&[cout], db).expect("db shape"),
    )
}

fn channel_sums<T: Float>(d: &[T], batch: usize, channels: usize, vol: usize) -> Vec<T> {
    let mut out = vec![T::zero(); channels];
    for b in 0..batch {
        for (c, o) in out.iter_mut().enumerate() {
            let base = (b * channels + c) * vol;
            let mut s = T::zero();
            for &v in &d[base..base + vol] {
                s += v;
            }
            *o += s;
        }
    }
    out
}

/// Transposed convolution, the adjoint of [`conv_nd`] in its input.
/// `x: [B,Cin,*sp]`, `w: [Cin,Cout,*k]` (the same weight layout the adjoint
/// forward convolution would use).
pub fn conv_transpose_nd<T: Float>(
    x: &Array<T>,
    w: &Array<T>,
    bias: &Array<T>,
    stride: &[usize],
    padding: &[usize],
) -> Result<(Array<T>, ConvGeom)> {
    let (batch, cin, cout) = check_conv_operands("conv_transpose_nd", x, w, bias, 0)?;
    let geom = ConvGeom::transposed(&x.shape()[2..], &w.shape()[2..], stride, padding)?;
    let small = geom.out_vol();
    let big = geom.in_vol();
    let kdim = cout * geom.kernel_vol();
    let mut out_shape = vec![batch, cout];
    out_shape.extend(geom.in_spatial());
    let mut y = vec![T::zero(); batch * cout * big];
    y.par_chunks_mut(cout * big).enumerate().for_each(|(b, yb)| {
        let xb = &x.data()[b * cin * small..(b + 1) * cin * small];
        let mut col = vec![T::zero(); kdim * small];
        gemm_tn(kdim, cin, small, w.data(), xb, &mut col);
        col2im(&col, cout, &geom, yb);
        for (c, chunk) in yb.chunks_mut(big).enumerate() {
            let bv = bias.data()[c];
            for v in chunk {
                *v += bv;
            }
        }
    });
    Ok((Array::new(&out_shape, y)?, geom))
}

pub fn conv_transpose_nd_backward<T: Float>(
    dy: &Array<T>,
    x: &Array<T>,
    w: &Array<T>,
    geom: &ConvGeom,
) -> (Array<T>, Array<T>, Array<T>) {
    let (batch, cin) = (x.shape()[0], x.shape()[1]);
    let cout = w.shape()[1];
    let small = geom.out_vol();
    let big = geom.in_vol();
    let kdim = cout * geom.kernel_vol();
    let mut dx = vec![T::zero(); batch * cin * small];
    let per_batch_dw: Vec<Vec<T>> = dx
        .par_chunks_mut(cin * small)
        .enumerate()
        .map(|(b, dxb)| {
            let dyb = &dy.data()[b * cout * big..(b + 1) * cout * big];
            let col = im2col(dyb, cout, geom);
            gemm(cin, kdim, small, w.data(), &col, dxb);
            let xb = &x.data()[b * cin * small..(b + 1) * cin * small];
            let mut dw = vec![T::zero(); cin * kdim];
            gemm_nt(cin, small, kdim, xb, &col, &mut dw);
            dw
        })
        .collect();
    let mut dw = vec![T::zero(); cin * kdim];
    for part in &per_batch_dw {
        for (a, &b) in dw.iter_mut().zip(part) {
            *a += b;
        }
    }
    let db = channel_sums(dy.data(), batch, cout, big);
    (
        Array::new(x.shape(), dx).expect("dx shape"),
        Array::new(w.shape(), dw).expect("dw shape"),
        Array::new(&[cout], db).expect("db shape"),
    )
}

/// Normalizes each contiguous group of `group_len` values to zero mean and
/// unit (population) variance. Returns the normalized values and the per-group
/// inverse standard deviations.
pub fn normalize_groups<T: Float>(x: &[T], group_len: usize, eps: T) -> (Vec<T>, Vec<T>) {
    let n = T::from_f(group_len as f64);
    let groups = x.len() / group_len;
    let mut xhat = vec![T::zero(); x.len()];
    let mut inv_std = vec![T::zero(); groups];
    for gi in 0..groups {
        let src = &x[gi * group_len..(gi + 1) * group_len];
        let mut mean = T::zero();
        for &v in src {
            mean += v;
        }
        mean = mean / n;
        let mut var = T::zero();
        for &v in src {
            var += (v - mean) * (v - mean);
        }
        var = var / n;
        let is = T::one() / (var + eps).sqrt();
        inv_std[gi] = is;
        for (o, &v) in xhat[gi * group_len..(gi + 1) * group_len]
            .iter_mut()
            .zip(src)
        {
            *o = (v - mean) * is;
        }
    }
    (xhat, inv_std)
}

/// Backward of [`normalize_groups`] given the upstream gradient on `xhat`.
pub fn normalize_groups_backward<T: Float>(
    dxhat: &[T],
    xhat: &[T],
    inv_std: &[T],
    group_len: usize,
) -> Vec<T> {
    let n = T::from_f(group_len as f64);
    let mut dx = vec![T::zero(); dxhat.len()];
    for (gi, &is) in inv_std.iter().enumerate() {
        let r = gi * group_len..(gi + 1) * group_len;
        let (dg, xg) = (&dxhat[r.clone()], &xhat[r.clone()]);
        let mut sum_d = T::zero();
        let mut sum_dx = T::zero();
        for (&d, &xh) in dg.iter().zip(xg) {
            sum_d += d;
            sum_dx += d * xh;
        }
        for ((o, &d), &xh) in dx[r].iter_mut().zip(dg).zip(xg) {
            *o = is / n * (n * d - sum_d - xh * sum_dx);
        }
    }
    dx
}

/// Stable softmax along `axis`.
pub fn softmax<T: Float>(x: &Array<T>, axis: usize) -> Result<Array<T>> {
    if axis >= x.ndim() {
        return Err(Error::InvalidArgument(format!(
            "softmax axis {axis} out of range for shape {:?}",
            x.shape()
        )));
    }
    let outer = numel(&x.shape()[..axis]);
    let len = x.shape()[axis];
    let inner = numel(&x.shape()[axis + 1..]);
    let src = x.data();
    let mut out = vec![T::zero(); x.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| (o * len + j) * inner + i;
            let mut mx = T::neg_infinity();
            for j in 0..len {
                mx = mx.max(src[at(j)]);
            }
            let mut s = T::zero();
            for j in 0..len {
                let e = (src[at(j)] - mx).exp();
                out[at(j)] = e;
                s += e;
            }
            for j in 0..len {
                out[at(j)] = out[at(j)] / s;
            }
        }
    }
    Array::new(x.shape(), out)
}

pub fn softmax_backward<T: Float>(y: &Array<T>, dy: &Array<T>, axis: usize) -> Array<T> {
    let outer = numel(&y.shape()[..axis]);
    let len = y.shape()[axis];
    let inner = numel(&y.shape()[axis + 1..]);
    let (yv, dyv) = (y.data(), dy.data());
    let mut dx = vec![T::zero(); y.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| (o * len + j) * inner + i;
            let mut dot = T::zero();
            for j in 0..len {
                dot += yv[at(j)] * dyv[at(j)];
            }
            for j in 0..len {
                dx[at(j)] = yv[at(j)] * (dyv[at(j)] - dot);
            }
        }
    }
    Array::new(y.shape(), dx).expect("softmax grad shape")
}

/// Depthwise causal convolution over the sequence axis of `x: [B,L,E]`
/// with `w: [E,width]`; tap `width-1` multiplies the current position.
pub fn causal_conv1d<T: Float>(x: &Array<T>, w: &Array<T>, bias: &Array<T>) -> Result<Array<T>> {
    if x.ndim() != 3 || w.ndim() != 2 || w.shape()[0] != x.shape()[2] || bias.shape() != [x.shape()[2]]
    {
        return Err(Error::shape(
            "causal_conv1d",
            format!(
                "input {:?}, weight {:?}, bias {:?}",
                x.shape(),
                w.shape(),
                bias.shape()
            ),
        ));
    }
    let (b, l, e) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let width = w.shape()[1];
    let mut y = vec![T::zero(); x.len()];
    for bi in 0..b {
        for t in 0..l {
            let out = &mut y[(bi * l + t) * e..(bi * l + t + 1) * e];
            out.copy_from_slice(bias.data());
            for j in 0..width {
                let Some(src_t) = (t + j).checked_sub(width - 1) else {
                    continue;
                };
                let src = &x.data()[(bi * l + src_t) * e..(bi * l + src_t + 1) * e];
                for c in 0..e {
                    out[c] += w.data()[c * width + j] * src[c];
                }
            }
        }
    }
    Array::new(x.shape(), y)
}

pub fn causal_conv1d_backward<T: Float>(
    dy: &Array<T>,
    x: &Array<T>,
    w: &Array<T>,
) -> (Array<T>, Array<T>, Array<T>) {
    let (b, l, e) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let width = w.shape()[1];
    let mut dx = vec![T::zero(); x.len()];
    let mut dw = vec![T::zero(); w.len()];
    let mut db = vec![T::zero(); e];
    for bi in 0..b {
        for t in 0..l {
            let g = &dy.data()[(bi * l + t) * e..(bi * l + t + 1) * e];
            for c in 0..e {
                db[c] += g[c];
            }
            for j in 0..width {
                let Some(src_t) = (t + j).checked_sub(width - 1) else {
                    continue;
                };
                let base = (bi * l + src_t) * e;
                for c in 0..e {
                    dw[c * width + j] += g[c] * x.data()[base + c];
                    dx[base + c] += g[c] * w.data()[c * width + j];
                }
            }
        }
    }
    (
        Array::new(x.shape(), dx).expect("dx"),
        Array::new(w.shape(), dw).expect("dw"),
        Array::new(&[e], db).expect("db"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small_case() {
        let a = Array::new(&[2, 2], vec![1.0f64, 2., 3., 4.]).unwrap();
        let b = Array::new(&[2, 2], vec![5.0f64, 6., 7., 8.]).unwrap();
        assert_eq!(matmul(&a, &b).unwrap().data(), &[19., 22., 43., 50.]);
    }

    #[test]
    fn matmul_rejects_inner_mismatch() {
        let a = Array::<f32>::zeros(&[2, 3]);
        let b = Array::<f32>::zeros(&[2, 3]);
        let err = matmul(&a, &b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]"), "{err}");
    }

    #[test]
    fn gemm_variants_agree() {
        let a: Vec<f64> = (0..12).map(|i| i as f64 * 0.5 - 2.0).collect();
        let b: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let mut c = vec![0.0; 15];
        gemm(3, 4, 5, &a, &b, &mut c);
        let mut c_tn = vec![0.0; 15];
        gemm_tn(3, 4, 5, &transpose(3, 4, &a), &b, &mut c_tn);
        let mut c_nt = vec![0.0; 15];
        gemm_nt(3, 4, 5, &a, &transpose(4, 5, &b), &mut c_nt);
        for i in 0..15 {
            assert!((c[i] - c_tn[i]).abs() < 1e-12);
            assert!((c[i] - c_nt[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_geometry_rejects_empty_output() {
        assert!(ConvGeom::forward(&[2, 2], &[3, 3], &[1, 1], &[0, 0]).is_err());
        assert!(ConvGeom::forward(&[4], &[3, 3], &[1, 1], &[0, 0]).is_err());
    }

    #[test]
    fn conv_output_extent_formula() {
        let g = ConvGeom::forward(&[7, 8, 9], &[3, 3, 3], &[2, 2, 1], &[1, 1, 1]).unwrap();
        assert_eq!(g.out_spatial(), vec![4, 4, 9]);
        let t = ConvGeom::transposed(&[4, 4], &[2, 2], &[2, 2], &[0, 0]).unwrap();
        assert_eq!(t.in_spatial(), vec![8, 8]);
    }

    #[test]
    fn causal_conv_ignores_future() {
        let x = Array::from_fn(&[1, 5, 2], |i| i as f64 + 1.0);
        let w = Array::from_fn(&[2, 4], |i| 0.1 * i as f64);
        let bias = Array::zeros(&[2]);
        let y = causal_conv1d(&x, &w, &bias).unwrap();
        // position 0 only sees x0 through the last tap
        assert_eq!(y.get(&[0, 0, 0]), w.get(&[0, 3]) * x.get(&[0, 0, 0]));
        let mut x2 = x.clone();
        x2.data_mut()[8] = 100.0; // t = 4
        let y2 = causal_conv1d(&x2, &w, &bias).unwrap();
        assert_eq!(&y.data()[..8], &y2.data()[..8]);
    }
}
