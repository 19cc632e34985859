//! Building blocks for the forward-only conformer.

use ndarray::{Array1, Array2, Array3, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::chunking::AttentionMask;
use crate::rng::SeededRng;

use super::ConvMode;

pub(crate) fn gelu(x: f32) -> f32 {
    const C: f32 = 0.797_884_6; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044_715 * x * x * x)).tanh())
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

fn xavier(rng: &mut SeededRng, fan_in: usize, fan_out: usize, shape: (usize, usize)) -> Array2<f32> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
    Array2::from_shape_simple_fn(shape, || rng.random_range(-bound..=bound))
}

#[derive(Debug, Clone)]
pub(crate) struct Linear {
    /// `in × out`
    pub weight: Array2<f32>,
    pub bias: Array1<f32>,
}

impl Linear {
    pub fn new(rng: &mut SeededRng, d_in: usize, d_out: usize) -> Self {
        Self {
            weight: xavier(rng, d_in, d_out, (d_in, d_out)),
            bias: Array1::zeros(d_out),
        }
    }

    pub fn forward(&self, x: &Array2<f32>) -> Array2<f32> {
        x.dot(&self.weight) + &self.bias
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LayerNorm {
    pub gamma: Array1<f32>,
    pub beta: Array1<f32>,
}

impl LayerNorm {
    const EPS: f32 = 1e-5;

    pub fn new(d: usize) -> Self {
        Self {
            gamma: Array1::ones(d),
            beta: Array1::zeros(d),
        }
    }

    pub fn forward(&self, x: &Array2<f32>) -> Array2<f32> {
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            let n = row.len() as f32;
            let mean = row.sum() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n;
            let inv = 1.0 / (var + Self::EPS).sqrt();
            for ((v, g), b) in row.iter_mut().zip(&self.gamma).zip(&self.beta) {
                *v = (*v - mean) * inv * g + b;
            }
        }
        out
    }
}

/// Pre-norm position-wise feed-forward.
#[derive(Debug, Clone)]
pub(crate) struct FeedForward {
    norm: LayerNorm,
    up: Linear,
    down: Linear,
}

impl FeedForward {
    pub fn new(rng: &mut SeededRng, d_model: usize, d_ffn: usize) -> Self {
        Self {
            norm: LayerNorm::new(d_model),
            up: Linear::new(rng, d_model, d_ffn),
            down: Linear::new(rng, d_ffn, d_model),
        }
    }

    pub fn forward(&self, x: &Array2<f32>) -> Array2<f32> {
        let h = self.up.forward(&self.norm.forward(x)).mapv(gelu);
        self.down.forward(&h)
    }
}

/// Multi-head self-attention whose logits carry a learned per-head bias
/// indexed by the clipped offset `i − j`.
#[derive(Debug, Clone)]
pub(crate) struct RelPosAttention {
    norm: LayerNorm,
    query: Linear,
    key: Linear,
    value: Linear,
    out: Linear,
    /// `heads × (2·clip + 1)`
    pos_bias: Array2<f32>,
    n_heads: usize,
    clip: usize,
}

impl RelPosAttention {
    pub fn new(rng: &mut SeededRng, d_model: usize, n_heads: usize, clip: usize) -> Self {
        let query = Linear::new(rng, d_model, d_model);
        let key = Linear::new(rng, d_model, d_model);
        let value = Linear::new(rng, d_model, d_model);
        let out = Linear::new(rng, d_model, d_model);
        let normal = Normal::new(0.0f32, 0.1).expect("positive std");
        let pos_bias = Array2::from_shape_simple_fn((n_heads, 2 * clip + 1), || normal.sample(rng));
        Self {
            norm: LayerNorm::new(d_model),
            query,
            key,
            value,
            out,
            pos_bias,
            n_heads,
            clip,
        }
    }

    fn offset_index(&self, i: usize, j: usize) -> usize {
        let clip = self.clip as isize;
        let off = (i as isize - j as isize).clamp(-clip, clip);
        (off + clip) as usize
    }

    pub fn forward(&self, x: &Array2<f32>, mask: &AttentionMask) -> Array2<f32> {
        let h = self.norm.forward(x);
        let q = self.query.forward(&h);
        let k = self.key.forward(&h);
        let v = self.value.forward(&h);
        let (t, d) = x.dim();
        let dk = d / self.n_heads;
        let scale = 1.0 / (dk as f32).sqrt();

        let mut ctx = Array2::<f32>::zeros((t, d));
        let mut logits = vec![0.0f32; t];
        for head in 0..self.n_heads {
            let cols = head * dk..(head + 1) * dk;
            for i in 0..t {
                let qi = q.row(i);
                let qi = &qi.as_slice().expect("row-major")[cols.clone()];
                let mut max = f32::NEG_INFINITY;
                for (j, logit) in logits.iter_mut().enumerate() {
                    *logit = if mask.allowed(i, j) {
                        let kj = &k.row(j).to_slice().expect("row-major")[cols.clone()];
                        let dot: f32 = qi.iter().zip(kj).map(|(a, b)| a * b).sum();
                        dot * scale + self.pos_bias[[head, self.offset_index(i, j)]]
                    } else {
                        f32::NEG_INFINITY
                    };
                    max = max.max(*logit);
                }
                let mut denom = 0.0f32;
                for l in logits.iter_mut() {
                    *l = (*l - max).exp();
                    denom += *l;
                }
                let mut out_row = ctx.row_mut(i);
                for (j, &w) in logits.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let w = w / denom;
                    for c in cols.clone() {
                        out_row[c] += w * v[[j, c]];
                    }
                }
            }
        }
        self.out.forward(&ctx)
    }
}

/// Pointwise → GLU → depthwise conv over time → GELU → pointwise.
#[derive(Debug, Clone)]
pub(crate) struct ConvModule {
    norm: LayerNorm,
    pointwise_in: Linear,
    /// `channels × kernel`
    depthwise: Array2<f32>,
    depthwise_bias: Array1<f32>,
    pointwise_out: Linear,
}

impl ConvModule {
    pub fn new(rng: &mut SeededRng, d_model: usize, kernel: usize) -> Self {
        let pointwise_in = Linear::new(rng, d_model, 2 * d_model);
        let bound = 1.0 / (kernel as f32).sqrt();
        let depthwise =
            Array2::from_shape_simple_fn((d_model, kernel), || rng.random_range(-bound..=bound));
        let pointwise_out = Linear::new(rng, d_model, d_model);
        Self {
            norm: LayerNorm::new(d_model),
            pointwise_in,
            depthwise,
            depthwise_bias: Array1::zeros(d_model),
            pointwise_out,
        }
    }

    pub fn forward(&self, x: &Array2<f32>, mode: ConvMode) -> Array2<f32> {
        let (t, d) = x.dim();
        let h = self.pointwise_in.forward(&self.norm.forward(x));
        let glu = Array2::from_shape_fn((t, d), |(i, c)| h[[i, c]] * sigmoid(h[[i, c + d]]));

        let kernel = self.depthwise.ncols();
        // tap k reads frame i − lookback + k
        let lookback = match mode {
            ConvMode::Causal => kernel - 1,
            ConvMode::Centered => (kernel - 1) / 2,
        } as isize;
        let mut conv = Array2::<f32>::zeros((t, d));
        for i in 0..t {
            for c in 0..d {
                let mut acc = self.depthwise_bias[c];
                for k in 0..kernel {
                    let src = i as isize - lookback + k as isize;
                    if (0..t as isize).contains(&src) {
                        acc += self.depthwise[[c, k]] * glu[[src as usize, c]];
                    }
                }
                conv[[i, c]] = gelu(acc);
            }
        }
        self.pointwise_out.forward(&conv)
    }
}

/// 3×3 convolution, stride 2 on both axes, padding 1 (output `ceil(n/2)`).
#[derive(Debug, Clone)]
pub(crate) struct Conv2dStride2 {
    /// `out × in × 3 × 3`, flattened
    weight: Vec<f32>,
    bias: Array1<f32>,
    c_in: usize,
    c_out: usize,
}

impl Conv2dStride2 {
    pub fn new(rng: &mut SeededRng, c_in: usize, c_out: usize) -> Self {
        let bound = (6.0 / ((c_in + c_out) * 9) as f64).sqrt() as f32;
        let weight = (0..c_out * c_in * 9)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Self {
            weight,
            bias: Array1::zeros(c_out),
            c_in,
            c_out,
        }
    }

    /// `(channels, time, freq)` → `(c_out, ceil(time/2), ceil(freq/2))`.
    pub fn forward(&self, x: &Array3<f32>) -> Array3<f32> {
        let (c_in, t, f) = x.dim();
        assert_eq!(c_in, self.c_in);
        let (t_out, f_out) = (t.div_ceil(2), f.div_ceil(2));
        let mut out = Array3::<f32>::zeros((self.c_out, t_out, f_out));
        for o in 0..self.c_out {
            for ti in 0..t_out {
                for fi in 0..f_out {
                    let mut acc = self.bias[o];
                    for c in 0..c_in {
                        for dt in 0..3 {
                            let src_t = (2 * ti + dt) as isize - 1;
                            if !(0..t as isize).contains(&src_t) {
                                continue;
                            }
                            for df in 0..3 {
                                let src_f = (2 * fi + df) as isize - 1;
                                if !(0..f as isize).contains(&src_f) {
                                    continue;
                                }
                                let w = self.weight[((o * c_in + c) * 3 + dt) * 3 + df];
                                acc += w * x[[c, src_t as usize, src_f as usize]];
                            }
                        }
                    }
                    out[[o, ti, fi]] = acc;
                }
            }
        }
        out
    }
}

/// Two stride-2 conv blocks with GELU, flattened per frame and projected.
#[derive(Debug, Clone)]
pub(crate) struct ConvFrontend {
    block1: Conv2dStride2,
    block2: Conv2dStride2,
    proj: Linear,
}

impl ConvFrontend {
    pub fn new(rng: &mut SeededRng, n_mels: usize, channels: usize, d_model: usize) -> Self {
        let block1 = Conv2dStride2::new(rng, 1, channels);
        let block2 = Conv2dStride2::new(rng, channels, channels);
        let f_out = n_mels.div_ceil(2).div_ceil(2);
        let proj = Linear::new(rng, channels * f_out, d_model);
        Self {
            block1,
            block2,
            proj,
        }
    }

    pub fn forward(&self, feats: &Array2<f32>) -> Array2<f32> {
        let x = feats.clone().insert_axis(Axis(0));
        let x = self.block1.forward(&x).mapv(gelu);
        let x = self.block2.forward(&x).mapv(gelu);
        let (c, t, f) = x.dim();
        // (c, t, f) → (t, c·f)
        let flat = x.permuted_axes([1, 0, 2]).as_standard_layout().to_owned();
        let flat = flat.into_shape_with_order((t, c * f)).expect("contiguous");
        self.proj.forward(&flat)
    }
}
