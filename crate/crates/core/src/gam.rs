//! Global attention: a channel gate followed by a spatial gate.
//!
//! ```text
//! F2 = M_C(F1) * F1
//! F3 = M_S(F2) * F2
//! ```
//!
//! The channel gate permutes to NHWC and runs a two-layer MLP over the
//! channels at every position (`c -> c/r -> c`, ReLU between). The spatial
//! gate is two same-padded convolutions (`c -> c/r -> c`, ReLU between).
//! Both gates end in a sigmoid and multiply elementwise into their input.

use crate::error::{config, Result};
use crate::rng::SplitMix64;
use crate::tensor::{
    activation, conv2d, dense, inverse_permutation, permute, Activation, ConvParams, Matrix,
    Tensor4,
};

pub const DEFAULT_REDUCTION: usize = 4;
pub const DEFAULT_KERNEL: usize = 7;

const NCHW_TO_NHWC: [usize; 4] = [0, 2, 3, 1];

#[derive(Debug, Clone, PartialEq)]
pub struct GamParams {
    pub channels: usize,
    pub reduction: usize,
    pub kernel: usize,
    /// `c x c/r`
    pub mlp_w1: Matrix,
    pub mlp_b1: Vec<f64>,
    /// `c/r x c`
    pub mlp_w2: Matrix,
    pub mlp_b2: Vec<f64>,
    /// `c -> c/r`, `kernel x kernel`, same padding
    pub conv1: ConvParams,
    /// `c/r -> c`, `kernel x kernel`, same padding
    pub conv2: ConvParams,
}

impl GamParams {
    /// All weights and biases zero, so both gates are exactly 0.5.
    pub fn zeros(channels: usize, reduction: usize, kernel: usize) -> Result<Self> {
        Self::filled_with(channels, reduction, kernel, |_| 0.0)
    }

    /// Weights uniform in `[-0.5, 0.5)` drawn from a seeded [`SplitMix64`],
    /// in the order w1, b1, w2, b2, conv1 weight, conv1 bias, conv2 weight,
    /// conv2 bias (each row-major).
    pub fn seeded(channels: usize, reduction: usize, kernel: usize, seed: u64) -> Result<Self> {
        let mut rng = SplitMix64::new(seed);
        Self::filled_with(channels, reduction, kernel, move |_| rng.uniform(-0.5, 0.5))
    }

    fn filled_with(
        channels: usize,
        reduction: usize,
        kernel: usize,
        mut fill: impl FnMut(usize) -> f64,
    ) -> Result<Self> {
        check_dims(channels, reduction, kernel)?;
        let hidden = channels / reduction;
        let mut take = |len: usize| (0..len).map(&mut fill).collect::<Vec<f64>>();
        let mlp_w1 = Matrix::new(channels, hidden, take(channels * hidden))?;
        let mlp_b1 = take(hidden);
        let mlp_w2 = Matrix::new(hidden, channels, take(hidden * channels))?;
        let mlp_b2 = take(channels);
        let k2 = kernel * kernel;
        let conv1 = ConvParams::same(Tensor4::new(
            [hidden, channels, kernel, kernel],
            take(hidden * channels * k2),
        )?)
        .with_bias(take(hidden));
        let conv2 = ConvParams::same(Tensor4::new(
            [channels, hidden, kernel, kernel],
            take(channels * hidden * k2),
        )?)
        .with_bias(take(channels));
        Ok(Self {
            channels,
            reduction,
            kernel,
            mlp_w1,
            mlp_b1,
            mlp_w2,
            mlp_b2,
            conv1,
            conv2,
        })
    }

    pub fn hidden(&self) -> usize {
        self.channels / self.reduction
    }

    pub fn validate(&self) -> Result<()> {
        check_dims(self.channels, self.reduction, self.kernel)?;
        let (c, h) = (self.channels, self.hidden());
        if self.mlp_w1.rows() != c || self.mlp_w1.cols() != h || self.mlp_b1.len() != h {
            return Err(config("channel MLP layer 1 must map c -> c/r"));
        }
        if self.mlp_w2.rows() != h || self.mlp_w2.cols() != c || self.mlp_b2.len() != c {
            return Err(config("channel MLP layer 2 must map c/r -> c"));
        }
        for (name, conv, i, o) in [("conv1", &self.conv1, c, h), ("conv2", &self.conv2, h, c)] {
            if !conv.is_same() || conv.kernel() != (self.kernel, self.kernel) {
                return Err(config(format!(
                    "{name} must be a stride-1 same-padded {k}x{k} convolution",
                    k = self.kernel
                )));
            }
            if conv.in_channels() != i || conv.out_channels() != o || conv.bias.len() != o {
                return Err(config(format!("{name} must map {i} -> {o} channels")));
            }
        }
        Ok(())
    }
}

fn check_dims(channels: usize, reduction: usize, kernel: usize) -> Result<()> {
    if channels == 0 || reduction == 0 || channels % reduction != 0 {
        return Err(config(format!(
            "reduction {reduction} must divide channel count {channels}"
        )));
    }
    if kernel % 2 == 0 {
        return Err(config(format!("spatial kernel {kernel} must be odd")));
    }
    Ok(())
}

fn check_input(x: &Tensor4, p: &GamParams) -> Result<()> {
    p.validate()?;
    if x.c() != p.channels {
        return Err(crate::error::shape(format!(
            "attention configured for {} channels, input has {}",
            p.channels,
            x.c()
        )));
    }
    Ok(())
}

/// The channel gate `M_C(F1)`, values in (0, 1).
pub fn channel_gate(f1: &Tensor4, p: &GamParams) -> Result<Tensor4> {
    check_input(f1, p)?;
    let nhwc = permute(f1, NCHW_TO_NHWC)?;
    let [n, h, w, c] = nhwc.shape();
    let rows = Matrix::new(n * h * w, c, nhwc.into_data())?;
    let hidden = dense(&rows, &p.mlp_w1, &p.mlp_b1)?;
    let hidden = Matrix::new(
        hidden.rows(),
        hidden.cols(),
        hidden.data().iter().map(|v| v.max(0.0)).collect(),
    )?;
    let logits = dense(&hidden, &p.mlp_w2, &p.mlp_b2)?;
    let logits = Tensor4::new([n, h, w, c], logits.into_data())?;
    let logits = permute(&logits, inverse_permutation(NCHW_TO_NHWC))?;
    Ok(activation(&logits, Activation::Sigmoid))
}

/// `F2 = M_C(F1) * F1`.
pub fn channel_attention(f1: &Tensor4, p: &GamParams) -> Result<Tensor4> {
    channel_gate(f1, p)?.mul(f1)
}

/// The spatial gate `M_S(F2)`, values in (0, 1).
pub fn spatial_gate(f2: &Tensor4, p: &GamParams) -> Result<Tensor4> {
    check_input(f2, p)?;
    let hidden = activation(&conv2d(f2, &p.conv1)?, Activation::Relu);
    let logits = conv2d(&hidden, &p.conv2)?;
    Ok(activation(&logits, Activation::Sigmoid))
}

/// `F3 = M_S(F2) * F2`.
pub fn spatial_attention(f2: &Tensor4, p: &GamParams) -> Result<Tensor4> {
    spatial_gate(f2, p)?.mul(f2)
}

/// Channel attention followed by spatial attention.
pub fn gam_forward(f1: &Tensor4, p: &GamParams) -> Result<Tensor4> {
    spatial_attention(&channel_attention(f1, p)?, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(shape: [usize; 4]) -> Tensor4 {
        Tensor4::from_fn(shape, |n, c, h, w| {
            ((n * 31 + c * 17 + h * 5 + w) % 11) as f64 - 5.0
        })
    }

    #[test]
    fn zero_params_halve_and_quarter() {
        let p = GamParams::zeros(8, 4, 7).unwrap();
        let x = ramp([2, 8, 5, 6]);
        assert_eq!(channel_attention(&x, &p).unwrap(), x.scale(0.5));
        assert_eq!(spatial_attention(&x, &p).unwrap(), x.scale(0.5));
        assert_eq!(gam_forward(&x, &p).unwrap(), x.scale(0.25));
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let p = GamParams::seeded(4, 2, 3, 5).unwrap();
        let x = Tensor4::zeros([1, 4, 6, 6]);
        assert_eq!(channel_attention(&x, &p).unwrap(), x);
        assert_eq!(gam_forward(&x, &p).unwrap(), x);
    }

    #[test]
    fn one_hot_channel_mlp() {
        // c = 2, r = 2: hidden unit reads channel 0, then writes +1 to
        // channel 0 logit and -1 to channel 1 logit.
        let mut p = GamParams::zeros(2, 2, 1).unwrap();
        p.mlp_w1 = Matrix::new(2, 1, vec![1.0, 0.0]).unwrap();
        p.mlp_w2 = Matrix::new(1, 2, vec![1.0, -1.0]).unwrap();
        let x = Tensor4::new([1, 2, 2, 2], vec![1.0, -2.0, 3.0, 0.5, 4.0, 5.0, 6.0, 7.0]).unwrap();
        let y = channel_attention(&x, &p).unwrap();
        for h in 0..2 {
            for w in 0..2 {
                let hid = x.get(0, 0, h, w).max(0.0);
                let g0 = 1.0 / (1.0 + (-hid).exp());
                let g1 = 1.0 / (1.0 + hid.exp());
                assert_eq!(y.get(0, 0, h, w), g0 * x.get(0, 0, h, w));
                assert_eq!(y.get(0, 1, h, w), g1 * x.get(0, 1, h, w));
            }
        }
    }

    #[test]
    fn spatial_with_pointwise_convs() {
        let mut p = GamParams::zeros(2, 2, 1).unwrap();
        // conv1: hidden = x0 + 2 x1 ; conv2: logits = (hidden, -hidden)
        p.conv1 = ConvParams::same(Tensor4::new([1, 2, 1, 1], vec![1.0, 2.0]).unwrap());
        p.conv2 = ConvParams::same(Tensor4::new([2, 1, 1, 1], vec![1.0, -1.0]).unwrap());
        let x = Tensor4::from_fn([1, 2, 4, 4], |_, c, h, w| (c as f64 - 0.5) * (h as f64 - w as f64));
        let y = spatial_attention(&x, &p).unwrap();
        for h in 0..4 {
            for w in 0..4 {
                let hid = (x.get(0, 0, h, w) + 2.0 * x.get(0, 1, h, w)).max(0.0);
                let g = [1.0 / (1.0 + (-hid).exp()), 1.0 / (1.0 + hid.exp())];
                for c in 0..2 {
                    assert_eq!(y.get(0, c, h, w), g[c] * x.get(0, c, h, w));
                }
            }
        }
    }

    #[test]
    fn config_errors() {
        assert!(matches!(GamParams::zeros(6, 4, 7), Err(crate::Error::Config(_))));
        assert!(matches!(GamParams::zeros(8, 4, 4), Err(crate::Error::Config(_))));
        let mut p = GamParams::zeros(4, 2, 3).unwrap();
        p.conv1.padding = 0;
        let x = Tensor4::zeros([1, 4, 5, 5]);
        assert!(matches!(spatial_attention(&x, &p), Err(crate::Error::Config(_))));
        let p = GamParams::zeros(4, 2, 3).unwrap();
        let x = Tensor4::zeros([1, 3, 5, 5]);
        assert!(channel_attention(&x, &p).is_err());
    }

    #[test]
    fn gates_shrink_magnitudes() {
        let p = GamParams::seeded(8, 4, 3, 1).unwrap();
        let x = ramp([1, 8, 6, 5]);
        let g = channel_gate(&x, &p).unwrap();
        assert!(g.data().iter().all(|&v| v > 0.0 && v < 1.0));
        let y = gam_forward(&x, &p).unwrap();
        assert_eq!(y.shape(), x.shape());
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!(a.abs() <= b.abs());
        }
    }
}
