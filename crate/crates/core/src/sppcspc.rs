//! SPPCSPC: a cross-stage-partial block with a spatial pyramid pooling branch.
//!
//! ```text
//!            ┌ cv1 ─ cv3 ─ cv4 ─┬──────────────┐
//!            │                  ├─ maxpool k0 ─┤
//!  x ────────┤                  ├─ maxpool k1 ─┼─ concat ─ cv5 ─ cv6 ─┐
//!            │                  └─ maxpool k2 ─┘                      ├─ concat ─ cv7 ─ y
//!            └ cv2 ───────────────────────────────────────────────────┘
//! ```
//!
//! Every convolution is stride 1 and same-padded and is followed by the
//! configured activation. Pools are stride 1 with `(k - 1) / 2` padding.

use crate::error::{config, shape, Result};
use crate::rng::SplitMix64;
use crate::tensor::{activation, concat_channels, conv2d, maxpool2d, Activation, ConvParams, Tensor4};

pub const DEFAULT_POOL_KERNELS: [usize; 3] = [5, 9, 13];
/// Range of the uniform distribution used by [`init_params_deterministic`].
pub const INIT_RANGE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SppcspcParams {
    pub in_c: usize,
    pub out_c: usize,
    pub hidden_c: usize,
    pub pool_kernels: Vec<usize>,
    pub activation: Activation,
    /// 1x1, in_c -> hidden_c
    pub cv1: ConvParams,
    /// 1x1, in_c -> hidden_c (plain branch)
    pub cv2: ConvParams,
    /// 3x3, hidden_c -> hidden_c
    pub cv3: ConvParams,
    /// 1x1, hidden_c -> hidden_c
    pub cv4: ConvParams,
    /// 1x1, (pools + 1) * hidden_c -> hidden_c
    pub cv5: ConvParams,
    /// 3x3, hidden_c -> hidden_c
    pub cv6: ConvParams,
    /// 1x1, 2 * hidden_c -> out_c
    pub cv7: ConvParams,
}

/// Expected `(out, in, k)` of each convolution, in order cv1..cv7.
fn conv_layout(in_c: usize, out_c: usize, hidden: usize, pools: usize) -> [(usize, usize, usize); 7] {
    [
        (hidden, in_c, 1),
        (hidden, in_c, 1),
        (hidden, hidden, 3),
        (hidden, hidden, 1),
        (hidden, (pools + 1) * hidden, 1),
        (hidden, hidden, 3),
        (out_c, 2 * hidden, 1),
    ]
}

impl SppcspcParams {
    /// Builds parameters from a fill function called once per weight, then
    /// once per bias, for cv1 through cv7 in order.
    pub fn filled_with(
        in_c: usize,
        out_c: usize,
        hidden_c: usize,
        pool_kernels: Vec<usize>,
        activation: Activation,
        mut fill: impl FnMut() -> f64,
    ) -> Result<Self> {
        if in_c == 0 || out_c == 0 || hidden_c == 0 {
            return Err(config("channel counts must be positive"));
        }
        let mut convs = Vec::with_capacity(7);
        for (o, i, k) in conv_layout(in_c, out_c, hidden_c, pool_kernels.len()) {
            let weight: Vec<f64> = (0..o * i * k * k).map(|_| fill()).collect();
            let bias: Vec<f64> = (0..o).map(|_| fill()).collect();
            convs.push(ConvParams::same(Tensor4::new([o, i, k, k], weight)?).with_bias(bias));
        }
        let [cv1, cv2, cv3, cv4, cv5, cv6, cv7]: [ConvParams; 7] =
            convs.try_into().expect("seven convolutions");
        let p = Self {
            in_c,
            out_c,
            hidden_c,
            pool_kernels,
            activation,
            cv1,
            cv2,
            cv3,
            cv4,
            cv5,
            cv6,
            cv7,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn convs(&self) -> [&ConvParams; 7] {
        [&self.cv1, &self.cv2, &self.cv3, &self.cv4, &self.cv5, &self.cv6, &self.cv7]
    }

    /// Every weight then bias of cv1..cv7, concatenated.
    pub fn flat_parameters(&self) -> Vec<f64> {
        self.convs()
            .iter()
            .flat_map(|c| c.weight.data().iter().chain(c.bias.iter()).copied())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.pool_kernels.iter().find(|&&k| k % 2 == 0) {
            return Err(config(format!("pool kernel {k} must be odd")));
        }
        if self.pool_kernels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config("pool kernels must be strictly ascending"));
        }
        let layout = conv_layout(self.in_c, self.out_c, self.hidden_c, self.pool_kernels.len());
        for (idx, (conv, (o, i, k))) in self.convs().into_iter().zip(layout).enumerate() {
            if conv.out_channels() != o
                || conv.in_channels() != i
                || conv.kernel() != (k, k)
                || conv.bias.len() != o
                || !conv.is_same()
            {
                return Err(config(format!(
                    "cv{} must be a same-padded {k}x{k} convolution {i} -> {o}",
                    idx + 1
                )));
            }
        }
        Ok(())
    }
}

/// Seeded parameters with the default layout: `hidden_c = out_c`, pools
/// `{5, 9, 13}`, SiLU activations. Every weight and bias is drawn uniformly
/// from `[-0.1, 0.1)` by [`SplitMix64`] in cv1..cv7 order.
pub fn init_params_deterministic(in_c: usize, out_c: usize, seed: u64) -> Result<SppcspcParams> {
    let mut rng = SplitMix64::new(seed);
    SppcspcParams::filled_with(
        in_c,
        out_c,
        out_c,
        DEFAULT_POOL_KERNELS.to_vec(),
        Activation::Silu,
        || rng.uniform(-INIT_RANGE, INIT_RANGE),
    )
}

fn conv_act(x: &Tensor4, conv: &ConvParams, act: Activation) -> Result<Tensor4> {
    Ok(activation(&conv2d(x, conv)?, act))
}

pub fn sppcspc_forward(x: &Tensor4, p: &SppcspcParams) -> Result<Tensor4> {
    p.validate()?;
    if x.c() != p.in_c {
        return Err(shape(format!(
            "block expects {} input channels, got {}",
            p.in_c,
            x.c()
        )));
    }
    let act = p.activation;
    let a = conv_act(x, &p.cv1, act)?;
    let a = conv_act(&a, &p.cv3, act)?;
    let a = conv_act(&a, &p.cv4, act)?;

    let mut pyramid = vec![a.clone()];
    for &k in &p.pool_kernels {
        pyramid.push(maxpool2d(&a, k, 1, (k - 1) / 2)?);
    }
    let refs: Vec<&Tensor4> = pyramid.iter().collect();
    let a = conv_act(&concat_channels(&refs)?, &p.cv5, act)?;
    let a = conv_act(&a, &p.cv6, act)?;

    let b = conv_act(x, &p.cv2, act)?;
    conv_act(&concat_channels(&[&a, &b])?, &p.cv7, act)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic() {
        let a = init_params_deterministic(4, 8, 0).unwrap();
        let b = init_params_deterministic(4, 8, 0).unwrap();
        let c = init_params_deterministic(4, 8, 1).unwrap();
        let bits = |p: &SppcspcParams| p.flat_parameters().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&c));
        assert!(a.flat_parameters().iter().all(|v| v.abs() <= INIT_RANGE));
    }

    #[test]
    fn layout_of_default_params() {
        let p = init_params_deterministic(3, 6, 2).unwrap();
        assert_eq!(p.cv5.in_channels(), 4 * 6);
        assert_eq!(p.cv7.in_channels(), 12);
        assert_eq!(p.cv3.kernel(), (3, 3));
        assert_eq!(p.pool_kernels.len() + 1, 4);
    }

    #[test]
    fn preserves_spatial_dims() {
        let p = init_params_deterministic(3, 5, 9).unwrap();
        let x = Tensor4::from_fn([2, 3, 6, 7], |n, c, h, w| ((n + c + h * w) % 5) as f64 * 0.3);
        assert_eq!(sppcspc_forward(&x, &p).unwrap().shape(), [2, 5, 6, 7]);
    }

    #[test]
    fn channel_mismatch_is_a_shape_error() {
        let p = init_params_deterministic(3, 5, 9).unwrap();
        let x = Tensor4::zeros([1, 4, 6, 6]);
        assert!(matches!(sppcspc_forward(&x, &p), Err(crate::Error::Shape(_))));
    }

    #[test]
    fn rejects_even_pool_kernels() {
        let r = SppcspcParams::filled_with(2, 2, 2, vec![4], Activation::Silu, || 0.0);
        assert!(matches!(r, Err(crate::Error::Config(_))));
    }

    #[test]
    fn constant_propagation() {
        // Identity 1x1 convs, centre-one 3x3 convs, channel-summing merges and
        // identity activation keep a constant input constant.
        let (c, pools) = (2usize, vec![5usize, 9, 13]);
        let mut p = SppcspcParams::filled_with(c, c, c, pools.clone(), Activation::Identity, || 0.0).unwrap();
        let eye = |o: usize, i: usize, k: usize, f: &dyn Fn(usize, usize) -> f64| {
            Tensor4::from_fn([o, i, k, k], |a, b, y, x| if y == k / 2 && x == k / 2 { f(a, b) } else { 0.0 })
        };
        let id = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for conv in [&mut p.cv1, &mut p.cv2, &mut p.cv4] {
            conv.weight = eye(c, c, 1, &id);
        }
        for conv in [&mut p.cv3, &mut p.cv6] {
            conv.weight = eye(c, c, 3, &id);
        }
        let branches = pools.len() + 1;
        p.cv5.weight = eye(c, branches * c, 1, &|a, b| if b % c == a { 1.0 / branches as f64 } else { 0.0 });
        p.cv7.weight = eye(c, 2 * c, 1, &|a, b| if b % c == a { 0.5 } else { 0.0 });
        let x = Tensor4::filled([1, c, 6, 6], 1.75);
        let y = sppcspc_forward(&x, &p).unwrap();
        assert_eq!(y, x);
    }
}
