//! Dense NCHW tensors and the forward kernels used by the attention and
//! pooling blocks.
//!
//! Everything runs in `f64` with a fixed summation order, so results are
//! reproducible bit-for-bit and can be compared exactly against naive loops.

use crate::error::{domain, shape, Result};

/// Dense 4-d array in row-major NCHW order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    shape: [usize; 4],
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn new(shape: [usize; 4], data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(crate::error::shape(format!("zero dimension in {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(crate::error::shape(format!(
                "shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(domain(format!("non-finite tensor entry {v}")));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: [usize; 4], value: f64) -> Self {
        assert!(shape.iter().all(|&d| d > 0), "zero dimension in {shape:?}");
        Self {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    /// Builds a tensor by evaluating `f(n, c, h, w)` at every index.
    pub fn from_fn(shape: [usize; 4], mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        assert!(shape.iter().all(|&d| d > 0), "zero dimension in {shape:?}");
        let [n, c, h, w] = shape;
        let mut data = Vec::with_capacity(n * c * h * w);
        for i in 0..n {
            for j in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        data.push(f(i, j, y, x));
                    }
                }
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }
    pub fn n(&self) -> usize {
        self.shape[0]
    }
    pub fn c(&self) -> usize {
        self.shape[1]
    }
    pub fn h(&self) -> usize {
        self.shape[2]
    }
    pub fn w(&self) -> usize {
        self.shape[3]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn offset(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        let [_, cs, hs, ws] = self.shape;
        ((n * cs + c) * hs + h) * ws + w
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, h: usize, w: usize) -> f64 {
        self.data[self.offset(n, c, h, w)]
    }

    pub fn set(&mut self, n: usize, c: usize, h: usize, w: usize, v: f64) {
        let o = self.offset(n, c, h, w);
        self.data[o] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|v| v * k)
    }

    /// Elementwise product of two same-shape tensors.
    pub fn mul(&self, other: &Tensor4) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Tensor4) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    fn zip_with(&self, other: &Tensor4, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape != other.shape {
            return Err(shape(format!(
                "elementwise op on {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Self {
            shape: self.shape,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Position-weighted sum used as a compact fingerprint of a tensor.
    ///
    /// Entry `i` (flat NCHW index) is weighted by `1 + (i mod 97) / 97`, so the
    /// value is sensitive to layout as well as content.
    pub fn checksum(&self) -> f64 {
        checksum(&self.data)
    }
}

/// See [`Tensor4::checksum`].
pub fn checksum(values: &[f64]) -> f64 {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| v * (1.0 + (i % 97) as f64 / 97.0))
        .sum()
}

/// Convolution weights and geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    /// `(out_c, in_c, kh, kw)`
    pub weight: Tensor4,
    /// One entry per output channel.
    pub bias: Vec<f64>,
    pub stride: usize,
    pub padding: usize,
}

impl ConvParams {
    /// Stride-1 convolution with `(k - 1) / 2` zero padding and zero bias.
    pub fn same(weight: Tensor4) -> Self {
        let padding = (weight.h() - 1) / 2;
        let out_c = weight.n();
        Self {
            weight,
            bias: vec![0.0; out_c],
            stride: 1,
            padding,
        }
    }

    pub fn with_bias(mut self, bias: Vec<f64>) -> Self {
        self.bias = bias;
        self
    }

    pub fn out_channels(&self) -> usize {
        self.weight.n()
    }
    pub fn in_channels(&self) -> usize {
        self.weight.c()
    }
    pub fn kernel(&self) -> (usize, usize) {
        (self.weight.h(), self.weight.w())
    }

    /// True for a stride-1 square odd kernel padded to keep spatial size.
    pub fn is_same(&self) -> bool {
        let (kh, kw) = self.kernel();
        self.stride == 1 && kh == kw && kh % 2 == 1 && self.padding == (kh - 1) / 2
    }
}

fn out_dim(input: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = input + 2 * pad;
    if padded < k {
        return Err(shape(format!(
            "kernel {k} larger than padded input {padded}"
        )));
    }
    Ok((padded - k) / stride + 1)
}

/// Cross-correlation with zero padding.
///
/// Each output accumulates `input * weight` over input channels (outer), then
/// kernel rows, then kernel columns, starting from zero; the bias is added last.
pub fn conv2d(x: &Tensor4, p: &ConvParams) -> Result<Tensor4> {
    let (oc, ic, kh, kw) = (p.out_channels(), p.in_channels(), p.weight.h(), p.weight.w());
    if x.c() != ic {
        return Err(shape(format!("conv expects {ic} input channels, got {}", x.c())));
    }
    if p.bias.len() != oc {
        return Err(shape(format!("conv has {oc} outputs but {} biases", p.bias.len())));
    }
    if p.stride == 0 {
        return Err(domain("conv stride must be positive"));
    }
    let (s, pad) = (p.stride, p.padding);
    let oh = out_dim(x.h(), kh, s, pad)?;
    let ow = out_dim(x.w(), kw, s, pad)?;
    let (h, w) = (x.h() as isize, x.w() as isize);
    let plane = oc * oh * ow;

    let run_image = |n: usize, out: &mut [f64]| {
        for o in 0..oc {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for ci in 0..ic {
                        for ky in 0..kh {
                            let iy = (oy * s + ky) as isize - pad as isize;
                            if iy < 0 || iy >= h {
                                continue;
                            }
                            for kx in 0..kw {
                                let ix = (ox * s + kx) as isize - pad as isize;
                                if ix < 0 || ix >= w {
                                    continue;
                                }
                                acc += x.get(n, ci, iy as usize, ix as usize)
                                    * p.weight.get(o, ci, ky, kx);
                            }
                        }
                    }
                    out[(o * oh + oy) * ow + ox] = acc + p.bias[o];
                }
            }
        }
    };

    let mut data = vec![0.0; x.n() * plane];
    for_each_image(&mut data, plane, run_image);
    Ok(Tensor4 {
        shape: [x.n(), oc, oh, ow],
        data,
    })
}

/// Windowed maximum; padded positions never win.
pub fn maxpool2d(x: &Tensor4, k: usize, stride: usize, pad: usize) -> Result<Tensor4> {
    if k == 0 {
        return Err(domain("pool kernel must be positive"));
    }
    if stride == 0 {
        return Err(domain("pool stride must be positive"));
    }
    let oh = out_dim(x.h(), k, stride, pad)?;
    let ow = out_dim(x.w(), k, stride, pad)?;
    let c = x.c();
    let (h, w) = (x.h() as isize, x.w() as isize);
    let plane = c * oh * ow;

    let run_image = |n: usize, out: &mut [f64]| {
        for ch in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    for ky in 0..k {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h {
                            continue;
                        }
                        for kx in 0..k {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix < 0 || ix >= w {
                                continue;
                            }
                            let v = x.get(n, ch, iy as usize, ix as usize);
                            if v > best {
                                best = v;
                            }
                        }
                    }
                    out[(ch * oh + oy) * ow + ox] = best;
                }
            }
        }
    };

    let mut data = vec![0.0; x.n() * plane];
    for_each_image(&mut data, plane, run_image);
    if data.iter().any(|v| !v.is_finite()) {
        return Err(shape("pool window covers only padding"));
    }
    Ok(Tensor4 {
        shape: [x.n(), c, oh, ow],
        data,
    })
}

/// Runs `f(batch_index, output_slice)` for every image; parallel when enabled.
/// Each image writes a disjoint slice, so the result matches serial order.
fn for_each_image<F>(data: &mut [f64], plane: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(plane)
            .enumerate()
            .for_each(|(n, out)| f(n, out));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(plane)
            .enumerate()
            .for_each(|(n, out)| f(n, out));
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// Affine map `x * weight + bias`, with `x` holding one sample per row.
pub fn dense(x: &Matrix, weight: &Matrix, bias: &[f64]) -> Result<Matrix> {
    if x.cols != weight.rows {
        return Err(shape(format!(
            "dense: input has {} features, weight expects {}",
            x.cols, weight.rows
        )));
    }
    if bias.len() != weight.cols {
        return Err(shape(format!(
            "dense: {} outputs but {} biases",
            weight.cols,
            bias.len()
        )));
    }
    let mut out = Matrix::zeros(x.rows, weight.cols);
    for r in 0..x.rows {
        for o in 0..weight.cols {
            let mut acc = 0.0;
            for i in 0..x.cols {
                acc += x.get(r, i) * weight.get(i, o);
            }
            out.set(r, o, acc + bias[o]);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Relu,
    Silu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply_scalar(self, t: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(t),
            Activation::Relu => t.max(0.0),
            Activation::Silu => t * sigmoid(t),
            Activation::Identity => t,
        }
    }
}

#[inline]
pub fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

pub fn activation(x: &Tensor4, kind: Activation) -> Tensor4 {
    x.map(|v| kind.apply_scalar(v))
}

/// Reorders axes: output axis `i` is input axis `order[i]`.
pub fn permute(x: &Tensor4, order: [usize; 4]) -> Result<Tensor4> {
    let mut seen = [false; 4];
    for &a in &order {
        if a >= 4 || seen[a] {
            return Err(domain(format!("{order:?} is not a permutation of 4 axes")));
        }
        seen[a] = true;
    }
    let in_shape = x.shape;
    let out_shape = order.map(|a| in_shape[a]);
    let mut strides = [0usize; 4];
    strides[3] = 1;
    for i in (0..3).rev() {
        strides[i] = strides[i + 1] * in_shape[i + 1];
    }
    let src_strides = order.map(|a| strides[a]);
    let mut data = Vec::with_capacity(x.data.len());
    for a in 0..out_shape[0] {
        for b in 0..out_shape[1] {
            for c in 0..out_shape[2] {
                for d in 0..out_shape[3] {
                    let off = a * src_strides[0] + b * src_strides[1] + c * src_strides[2] + d * src_strides[3];
                    data.push(x.data[off]);
                }
            }
        }
    }
    Ok(Tensor4 {
        shape: out_shape,
        data,
    })
}

/// The permutation that undoes `order`.
pub fn inverse_permutation(order: [usize; 4]) -> [usize; 4] {
    let mut inv = [0; 4];
    for (i, &a) in order.iter().enumerate() {
        inv[a] = i;
    }
    inv
}

/// Stacks tensors along the channel axis, preserving input order.
pub fn concat_channels(xs: &[&Tensor4]) -> Result<Tensor4> {
    let first = xs.first().ok_or_else(|| shape("concat of zero tensors"))?;
    let [n, _, h, w] = first.shape;
    for t in xs {
        if t.n() != n || t.h() != h || t.w() != w {
            return Err(shape(format!(
                "concat: {:?} does not match batch/spatial dims of {:?}",
                t.shape, first.shape
            )));
        }
    }
    let c_total: usize = xs.iter().map(|t| t.c()).sum();
    let mut data = Vec::with_capacity(n * c_total * h * w);
    for i in 0..n {
        for t in xs {
            let plane = t.c() * h * w;
            data.extend_from_slice(&t.data[i * plane..(i + 1) * plane]);
        }
    }
    Ok(Tensor4 {
        shape: [n, c_total, h, w],
        data,
    })
}
