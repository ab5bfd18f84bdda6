//! Dense NCHW tensors and the numeric kernels behind the autodiff ops.
//!
//! Every tensor is four-dimensional. Vectors are `[n, c, 1, 1]` and scalars
//! are `[1, 1, 1, 1]`; this keeps fully connected layers expressible as
//! 1x1 convolutions.

use alloc::vec;
use alloc::vec::Vec;

pub type Shape = [usize; 4];

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: Shape) -> Self {
        Self { shape, data: vec![0.0; numel(shape)] }
    }

    pub fn full(shape: Shape, value: f64) -> Self {
        Self { shape, data: vec![value; numel(shape)] }
    }

    pub fn scalar(value: f64) -> Self {
        Self::full([1, 1, 1, 1], value)
    }

    /// Panics if `data.len()` does not match the shape.
    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Self {
        assert_eq!(numel(shape), data.len(), "tensor data does not match shape {:?}", shape);
        Self { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Value of a `[1,1,1,1]` tensor (or the first element otherwise).
    pub fn item(&self) -> f64 {
        self.data[0]
    }

    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> f64 {
        let [_, cc, hh, ww] = self.shape;
        self.data[((n * cc + c) * hh + h) * ww + w]
    }

    pub fn reshape(mut self, shape: Shape) -> Self {
        assert_eq!(numel(shape), self.data.len());
        self.shape = shape;
        self
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { shape: self.shape, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.shape, other.shape, "elementwise shape mismatch");
        Self {
            shape: self.shape,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Copy of sample `n` as a `[1, c, h, w]` tensor.
    pub fn sample(&self, n: usize) -> Tensor {
        let per = self.shape[1] * self.shape[2] * self.shape[3];
        Tensor::from_vec(
            [1, self.shape[1], self.shape[2], self.shape[3]],
            self.data[n * per..(n + 1) * per].to_vec(),
        )
    }

    /// Stacks same-shaped `[1, c, h, w]` tensors along the batch axis.
    pub fn stack(items: &[Tensor]) -> Tensor {
        assert!(!items.is_empty(), "cannot stack zero tensors");
        let [_, c, h, w] = items[0].shape;
        let mut data = Vec::with_capacity(items.len() * c * h * w);
        let mut n = 0;
        for t in items {
            assert_eq!([t.shape[1], t.shape[2], t.shape[3]], [c, h, w], "stack shape mismatch");
            data.extend_from_slice(&t.data);
            n += t.shape[0];
        }
        Tensor::from_vec([n, c, h, w], data)
    }
}

pub fn numel(shape: Shape) -> usize {
    shape.iter().product()
}

pub(crate) fn conv_out(size: usize, k: usize, stride: usize, pad: usize) -> usize {
    (size + 2 * pad - k) / stride + 1
}

/// Geometry of a square-kernel zero-padded convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

/// Output columns `oj` whose input column `oj * stride + kj - pad` lies in `[0, w)`.
fn valid_cols(w: usize, wo: usize, kj: usize, stride: usize, pad: usize) -> (usize, usize) {
    let lo = if kj >= pad { 0 } else { (pad - kj).div_ceil(stride) };
    // largest oj with oj * stride + kj - pad <= w - 1
    let hi = if w + pad > kj { ((w + pad - kj - 1) / stride + 1).min(wo) } else { 0 };
    (lo.min(hi), hi)
}

/// Unfolds output rows `r0..r1` into a `[c*k*k, (r1-r0)*wo]` matrix.
#[allow(clippy::too_many_arguments)]
fn im2col(x: &[f64], c: usize, h: usize, w: usize, g: ConvGeom, rows: (usize, usize), wo: usize, cols: &mut [f64]) {
    let ConvGeom { k, stride, pad } = g;
    let (r0, r1) = rows;
    let len = (r1 - r0) * wo;
    for ci in 0..c {
        let plane = &x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (ci * k + ki) * k + kj;
                let dst = &mut cols[row * len..(row + 1) * len];
                let (lo, hi) = valid_cols(w, wo, kj, stride, pad);
                for oi in r0..r1 {
                    let ii = (oi * stride + ki) as isize - pad as isize;
                    let out_row = &mut dst[(oi - r0) * wo..(oi - r0 + 1) * wo];
                    if ii < 0 || ii >= h as isize {
                        out_row.fill(0.0);
                        continue;
                    }
                    let src = &plane[ii as usize * w..(ii as usize + 1) * w];
                    out_row[..lo].fill(0.0);
                    out_row[hi..].fill(0.0);
                    if lo < hi {
                        let j0 = lo * stride + kj - pad;
                        if stride == 1 {
                            out_row[lo..hi].copy_from_slice(&src[j0..j0 + hi - lo]);
                        } else {
                            for (t, v) in out_row[lo..hi].iter_mut().enumerate() {
                                *v = src[j0 + t * stride];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates the columns back into `x`.
#[allow(clippy::too_many_arguments)]
fn col2im(cols: &[f64], c: usize, h: usize, w: usize, g: ConvGeom, rows: (usize, usize), wo: usize, x: &mut [f64]) {
    let ConvGeom { k, stride, pad } = g;
    let (r0, r1) = rows;
    let len = (r1 - r0) * wo;
    for ci in 0..c {
        let plane = &mut x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (ci * k + ki) * k + kj;
                let src = &cols[row * len..(row + 1) * len];
                let (lo, hi) = valid_cols(w, wo, kj, stride, pad);
                if lo >= hi {
                    continue;
                }
                let j0 = lo * stride + kj - pad;
                for oi in r0..r1 {
                    let ii = (oi * stride + ki) as isize - pad as isize;
                    if ii < 0 || ii >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[ii as usize * w..(ii as usize + 1) * w];
                    let s = &src[(oi - r0) * wo + lo..(oi - r0) * wo + hi];
                    if stride == 1 {
                        for (d, v) in dst[j0..j0 + hi - lo].iter_mut().zip(s) {
                            *d += v;
                        }
                    } else {
                        for (t, v) in s.iter().enumerate() {
                            dst[j0 + t * stride] += v;
                        }
                    }
                }
            }
        }
    }
}

/// Row-major `c = op(a) * op(b) + beta * c` with explicit strides; `c` has row stride `rsc`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    beta: f64,
    c: &mut [f64],
    rsc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(rsc >= n && c.len() >= (m - 1) * rsc + n);
    let reach = |len: usize, rs: isize, cs: isize, r: usize, q: usize| {
        r == 0 || q == 0 || len as isize > (r as isize - 1) * rs + (q as isize - 1) * cs
    };
    assert!(reach(a.len(), rsa, csa, m, k) && reach(b.len(), rsb, csb, k, n));
    // SAFETY: the asserts above bound every index reachable through the given
    // dimensions and (non-negative) strides by the slice lengths.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        );
    }
}

fn is_pointwise(g: ConvGeom) -> bool {
    g.k == 1 && g.stride == 1 && g.pad == 0
}

/// Output rows per im2col tile, keeping the unfolded tile around 256 KiB.
fn tile_rows(ckk: usize, wo: usize, ho: usize) -> usize {
    (32 * 1024 / (ckk * wo).max(1)).clamp(1, ho.max(1))
}

/// `y[n,o] = sum_c w[o,c] * x[n,c]` over every kernel tap.
pub(crate) fn conv2d(x: &Tensor, wt: &Tensor, g: ConvGeom) -> Tensor {
    let [n, c, h, w] = x.shape;
    let [o, wc, k1, k2] = wt.shape;
    assert_eq!(c, wc, "conv input channels {} vs weight channels {}", c, wc);
    assert!(k1 == g.k && k2 == g.k);
    let ho = conv_out(h, g.k, g.stride, g.pad);
    let wo = conv_out(w, g.k, g.stride, g.pad);
    let hw = ho * wo;
    let ckk = c * g.k * g.k;
    let mut y = Tensor::zeros([n, o, ho, wo]);
    let tr = tile_rows(ckk, wo, ho);
    let mut cols = if is_pointwise(g) { Vec::new() } else { vec![0.0; ckk * tr * wo] };
    for s in 0..n {
        let xs = &x.data[s * c * h * w..(s + 1) * c * h * w];
        let ys = &mut y.data[s * o * hw..(s + 1) * o * hw];
        if is_pointwise(g) {
            gemm(o, ckk, hw, &wt.data, (ckk as isize, 1), xs, (hw as isize, 1), 0.0, ys, hw);
            continue;
        }
        let mut r0 = 0;
        while r0 < ho {
            let r1 = (r0 + tr).min(ho);
            let len = (r1 - r0) * wo;
            im2col(xs, c, h, w, g, (r0, r1), wo, &mut cols);
            gemm(o, ckk, len, &wt.data, (ckk as isize, 1), &cols, (len as isize, 1), 0.0, &mut ys[r0 * wo..], hw);
            r0 = r1;
        }
    }
    y
}

/// Adjoint of [`conv2d`] in its input: returns `d<g, conv2d(x, w)>/dx`.
pub(crate) fn conv2d_input_grad(gy: &Tensor, wt: &Tensor, g: ConvGeom, in_hw: (usize, usize)) -> Tensor {
    let [n, o, ho, wo] = gy.shape;
    let [wo_ch, c, _, _] = wt.shape;
    assert_eq!(o, wo_ch);
    let (h, w) = in_hw;
    let hw = ho * wo;
    let ckk = c * g.k * g.k;
    let mut dx = Tensor::zeros([n, c, h, w]);
    let tr = tile_rows(ckk, wo, ho);
    let mut cols = if is_pointwise(g) { Vec::new() } else { vec![0.0; ckk * tr * wo] };
    for s in 0..n {
        let gs = &gy.data[s * o * hw..(s + 1) * o * hw];
        let dxs = &mut dx.data[s * c * h * w..(s + 1) * c * h * w];
        if is_pointwise(g) {
            gemm(ckk, o, hw, &wt.data, (1, ckk as isize), gs, (hw as isize, 1), 0.0, dxs, hw);
            continue;
        }
        let mut r0 = 0;
        while r0 < ho {
            let r1 = (r0 + tr).min(ho);
            let len = (r1 - r0) * wo;
            gemm(ckk, o, len, &wt.data, (1, ckk as isize), &gs[r0 * wo..], (hw as isize, 1), 0.0, &mut cols, len);
            col2im(&cols, c, h, w, g, (r0, r1), wo, dxs);
            r0 = r1;
        }
    }
    dx
}

/// Adjoint of [`conv2d`] in its weights: returns `d<g, conv2d(x, w)>/dw`.
pub(crate) fn conv2d_weight_grad(x: &Tensor, gy: &Tensor, g: ConvGeom, out_ch: usize) -> Tensor {
    let [n, c, h, w] = x.shape;
    let [gn, o, ho, wo] = gy.shape;
    assert_eq!(n, gn);
    assert_eq!(o, out_ch);
    let hw = ho * wo;
    let ckk = c * g.k * g.k;
    let mut dw = Tensor::zeros([o, c, g.k, g.k]);
    let tr = tile_rows(ckk, wo, ho);
    let mut cols = if is_pointwise(g) { Vec::new() } else { vec![0.0; ckk * tr * wo] };
    for s in 0..n {
        let xs = &x.data[s * c * h * w..(s + 1) * c * h * w];
        let gs = &gy.data[s * o * hw..(s + 1) * o * hw];
        if is_pointwise(g) {
            // dw[o, c] += g[o, hw] * x[c, hw]^T
            gemm(o, hw, ckk, gs, (hw as isize, 1), xs, (1, hw as isize), 1.0, &mut dw.data, ckk);
            continue;
        }
        let mut r0 = 0;
        while r0 < ho {
            let r1 = (r0 + tr).min(ho);
            let len = (r1 - r0) * wo;
            im2col(xs, c, h, w, g, (r0, r1), wo, &mut cols);
            gemm(o, len, ckk, &gs[r0 * wo..], (hw as isize, 1), &cols, (1, len as isize), 1.0, &mut dw.data, ckk);
            r0 = r1;
        }
    }
    dw
}

/// Sum over non-overlapping 2x2 windows; a trailing odd row/column is dropped.
pub(crate) fn sum_pool2(x: &Tensor) -> Tensor {
    let [n, c, h, w] = x.shape;
    let (ho, wo) = (h / 2, w / 2);
    let mut y = Tensor::zeros([n, c, ho, wo]);
    for p in 0..n * c {
        let src = &x.data[p * h * w..(p + 1) * h * w];
        let dst = &mut y.data[p * ho * wo..(p + 1) * ho * wo];
        for i in 0..ho {
            for j in 0..wo {
                let a = (2 * i) * w + 2 * j;
                dst[i * wo + j] = src[a] + src[a + 1] + src[a + w] + src[a + w + 1];
            }
        }
    }
    y
}

/// Nearest-neighbour 2x upsampling into an `out_hw` canvas (extra border is zero).
/// Exact adjoint of [`sum_pool2`].
pub(crate) fn upsample2(x: &Tensor, out_hw: (usize, usize)) -> Tensor {
    let [n, c, h, w] = x.shape;
    let (ho, wo) = out_hw;
    assert!(ho / 2 == h && wo / 2 == w, "upsample target {:?} incompatible with {}x{}", out_hw, h, w);
    let mut y = Tensor::zeros([n, c, ho, wo]);
    for p in 0..n * c {
        let src = &x.data[p * h * w..(p + 1) * h * w];
        let dst = &mut y.data[p * ho * wo..(p + 1) * ho * wo];
        for i in 0..h {
            for j in 0..w {
                let v = src[i * w + j];
                let a = (2 * i) * wo + 2 * j;
                dst[a] = v;
                dst[a + 1] = v;
                dst[a + wo] = v;
                dst[a + wo + 1] = v;
            }
        }
    }
    y
}

/// Repeats size-1 axes of `x` up to `shape`.
pub(crate) fn broadcast_to(x: &Tensor, shape: Shape) -> Tensor {
    if x.shape == shape {
        return x.clone();
    }
    for d in 0..4 {
        assert!(x.shape[d] == shape[d] || x.shape[d] == 1, "cannot broadcast {:?} to {:?}", x.shape, shape);
    }
    let [n, c, h, w] = shape;
    let xs = x.shape;
    let mut y = Tensor::zeros(shape);
    let mut idx = 0;
    for a in 0..n {
        let a0 = if xs[0] == 1 { 0 } else { a };
        for b in 0..c {
            let b0 = if xs[1] == 1 { 0 } else { b };
            for i in 0..h {
                let i0 = if xs[2] == 1 { 0 } else { i };
                let base = ((a0 * xs[1] + b0) * xs[2] + i0) * xs[3];
                if xs[3] == 1 {
                    let v = x.data[base];
                    y.data[idx..idx + w].iter_mut().for_each(|t| *t = v);
                } else {
                    y.data[idx..idx + w].copy_from_slice(&x.data[base..base + w]);
                }
                idx += w;
            }
        }
    }
    y
}

/// Sums `x` over the axes where `shape` has extent 1. Adjoint of [`broadcast_to`].
pub(crate) fn reduce_to(x: &Tensor, shape: Shape) -> Tensor {
    if x.shape == shape {
        return x.clone();
    }
    for d in 0..4 {
        assert!(x.shape[d] == shape[d] || shape[d] == 1, "cannot reduce {:?} to {:?}", x.shape, shape);
    }
    let [n, c, h, w] = x.shape;
    let mut y = Tensor::zeros(shape);
    let mut idx = 0;
    for a in 0..n {
        let a0 = if shape[0] == 1 { 0 } else { a };
        for b in 0..c {
            let b0 = if shape[1] == 1 { 0 } else { b };
            for i in 0..h {
                let i0 = if shape[2] == 1 { 0 } else { i };
                let base = ((a0 * shape[1] + b0) * shape[2] + i0) * shape[3];
                if shape[3] == 1 {
                    y.data[base] += x.data[idx..idx + w].iter().sum::<f64>();
                } else {
                    for j in 0..w {
                        y.data[base + j] += x.data[idx + j];
                    }
                }
                idx += w;
            }
        }
    }
    y
}

/// Channels `[start, start + len)` of `x`.
pub(crate) fn slice_channels(x: &Tensor, start: usize, len: usize) -> Tensor {
    let [n, c, h, w] = x.shape;
    assert!(start + len <= c);
    let plane = h * w;
    let mut y = Tensor::zeros([n, len, h, w]);
    for s in 0..n {
        let src = &x.data[(s * c + start) * plane..(s * c + start + len) * plane];
        y.data[s * len * plane..(s + 1) * len * plane].copy_from_slice(src);
    }
    y
}

/// Places `x` at channel offset `start` of a zero tensor with `total` channels.
pub(crate) fn embed_channels(x: &Tensor, start: usize, total: usize) -> Tensor {
    let [n, len, h, w] = x.shape;
    assert!(start + len <= total);
    let plane = h * w;
    let mut y = Tensor::zeros([n, total, h, w]);
    for s in 0..n {
        y.data[(s * total + start) * plane..(s * total + start + len) * plane]
            .copy_from_slice(&x.data[s * len * plane..(s + 1) * len * plane]);
    }
    y
}

pub(crate) fn concat_channels(parts: &[&Tensor]) -> Tensor {
    let [n, _, h, w] = parts[0].shape;
    let total: usize = parts.iter().map(|p| p.shape[1]).sum();
    let plane = h * w;
    let mut y = Tensor::zeros([n, total, h, w]);
    for s in 0..n {
        let mut off = 0;
        for p in parts {
            assert_eq!([p.shape[0], p.shape[2], p.shape[3]], [n, h, w], "concat shape mismatch");
            let len = p.shape[1];
            y.data[(s * total + off) * plane..(s * total + off + len) * plane]
                .copy_from_slice(&p.data[s * len * plane..(s + 1) * len * plane]);
            off += len;
        }
    }
    y
}
