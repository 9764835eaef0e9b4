//! Slow nested-loop implementations used to cross-check the kernels and the
//! composite blocks.
//!
//! These work on explicitly padded copies and index arithmetic written out by
//! hand; they share no code with [`crate::tensor`] beyond the tensor
//! container itself. Summation order matches the fast kernels so results are
//! bit-identical.

use crate::gam::GamParams;
use crate::sppcspc::SppcspcParams;
use crate::tensor::{Activation, ConvParams, Tensor4};

fn padded(x: &Tensor4, pad: usize, fill: f64) -> (Vec<f64>, usize, usize) {
    let [n, c, h, w] = x.shape();
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    let mut out = vec![fill; n * c * ph * pw];
    for i in 0..n {
        for j in 0..c {
            for y in 0..h {
                for xx in 0..w {
                    out[((i * c + j) * ph + y + pad) * pw + xx + pad] = x.get(i, j, y, xx);
                }
            }
        }
    }
    (out, ph, pw)
}

/// Zero-padded cross-correlation. Padding zeros are multiplied in rather
/// than skipped.
pub fn conv2d(x: &Tensor4, p: &ConvParams) -> Tensor4 {
    let [n, c, _, _] = x.shape();
    let [oc, ic, kh, kw] = p.weight.shape();
    assert_eq!(c, ic, "channel mismatch");
    let s = p.stride;
    let (buf, ph, pw) = padded(x, p.padding, 0.0);
    let oh = (ph - kh) / s + 1;
    let ow = (pw - kw) / s + 1;
    let mut out = Tensor4::zeros([n, oc, oh, ow]);
    for i in 0..n {
        for o in 0..oc {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for ci in 0..ic {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let v = buf[((i * c + ci) * ph + oy * s + ky) * pw + ox * s + kx];
                                acc += v * p.weight.get(o, ci, ky, kx);
                            }
                        }
                    }
                    out.set(i, o, oy, ox, acc + p.bias[o]);
                }
            }
        }
    }
    out
}

/// Max pooling over a copy padded with negative infinity.
pub fn maxpool2d(x: &Tensor4, k: usize, stride: usize, pad: usize) -> Tensor4 {
    let [n, c, _, _] = x.shape();
    let (buf, ph, pw) = padded(x, pad, f64::NEG_INFINITY);
    let oh = (ph - k) / stride + 1;
    let ow = (pw - k) / stride + 1;
    let mut out = Tensor4::zeros([n, c, oh, ow]);
    for i in 0..n {
        for j in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    for ky in 0..k {
                        for kx in 0..k {
                            let v = buf[((i * c + j) * ph + oy * stride + ky) * pw + ox * stride + kx];
                            best = best.max(v);
                        }
                    }
                    out.set(i, j, oy, ox, best);
                }
            }
        }
    }
    out
}

fn act(x: &Tensor4, kind: Activation) -> Tensor4 {
    Tensor4::from_fn(x.shape(), |n, c, h, w| kind.apply_scalar(x.get(n, c, h, w)))
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Channel attention evaluated position by position, without any permute.
pub fn channel_attention(f1: &Tensor4, p: &GamParams) -> Tensor4 {
    let [n, c, h, w] = f1.shape();
    let hid = p.hidden();
    let mut out = Tensor4::zeros(f1.shape());
    for i in 0..n {
        for y in 0..h {
            for x in 0..w {
                let mut hidden = vec![0.0; hid];
                for (u, hv) in hidden.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for ch in 0..c {
                        acc += f1.get(i, ch, y, x) * p.mlp_w1.get(ch, u);
                    }
                    *hv = (acc + p.mlp_b1[u]).max(0.0);
                }
                for ch in 0..c {
                    let mut acc = 0.0;
                    for (u, hv) in hidden.iter().enumerate() {
                        acc += hv * p.mlp_w2.get(u, ch);
                    }
                    let gate = sigmoid(acc + p.mlp_b2[ch]);
                    out.set(i, ch, y, x, gate * f1.get(i, ch, y, x));
                }
            }
        }
    }
    out
}

pub fn spatial_attention(f2: &Tensor4, p: &GamParams) -> Tensor4 {
    let hidden = act(&conv2d(f2, &p.conv1), Activation::Relu);
    let gate = act(&conv2d(&hidden, &p.conv2), Activation::Sigmoid);
    Tensor4::from_fn(f2.shape(), |n, c, h, w| gate.get(n, c, h, w) * f2.get(n, c, h, w))
}

pub fn gam_forward(f1: &Tensor4, p: &GamParams) -> Tensor4 {
    spatial_attention(&channel_attention(f1, p), p)
}

fn concat(xs: &[Tensor4]) -> Tensor4 {
    let [n, _, h, w] = xs[0].shape();
    let total: usize = xs.iter().map(|t| t.c()).sum();
    let mut out = Tensor4::zeros([n, total, h, w]);
    for i in 0..n {
        let mut base = 0;
        for t in xs {
            for c in 0..t.c() {
                for y in 0..h {
                    for x in 0..w {
                        out.set(i, base + c, y, x, t.get(i, c, y, x));
                    }
                }
            }
            base += t.c();
        }
    }
    out
}

pub fn sppcspc_forward(x: &Tensor4, p: &SppcspcParams) -> Tensor4 {
    let cba = |t: &Tensor4, conv: &ConvParams| act(&conv2d(t, conv), p.activation);
    let a = cba(&cba(&cba(x, &p.cv1), &p.cv3), &p.cv4);
    let mut branches = vec![a.clone()];
    for &k in &p.pool_kernels {
        branches.push(maxpool2d(&a, k, 1, (k - 1) / 2));
    }
    let a = cba(&cba(&concat(&branches), &p.cv5), &p.cv6);
    let b = cba(x, &p.cv2);
    cba(&concat(&[a, b]), &p.cv7)
}
