use ndarray::{Array1, Array2};
use rand::Rng;

use crate::encoder::HiddenSequence;
use crate::rng::seeded_rng;

use super::{log_softmax, HeadError};

/// Attention pooling (`v·tanh(W·h)` scores) and a linear classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolingWeights {
    /// `d_att × d_model`
    pub attn_proj: Array2<f64>,
    pub attn_vector: Array1<f64>,
    /// `n_classes × d_model`
    pub classifier: Array2<f64>,
    pub classifier_bias: Array1<f64>,
}

impl PoolingWeights {
    pub fn seeded(d_model: usize, d_att: usize, n_classes: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let mut uniform = |fan_in: usize, fan_out: usize, shape: (usize, usize)| {
            let b = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Array2::from_shape_simple_fn(shape, || rng.random_range(-b..=b))
        };
        let attn_proj = uniform(d_model, d_att, (d_att, d_model));
        let attn_vector = uniform(d_att, 1, (1, d_att)).row(0).to_owned();
        let classifier = uniform(d_model, n_classes, (n_classes, d_model));
        Self {
            attn_proj,
            attn_vector,
            classifier,
            classifier_bias: Array1::zeros(n_classes),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledOutput {
    pub pooled: Array1<f64>,
    /// Softmax weight per frame.
    pub attention: Array1<f64>,
    pub log_probs: Array1<f64>,
}

pub fn attention_pool_classify(h: &HiddenSequence, w: &PoolingWeights) -> Result<PooledOutput, HeadError> {
    if h.is_empty() {
        return Err(HeadError::EmptyInput);
    }
    let d = h.data.ncols();
    if w.attn_proj.ncols() != d || w.classifier.ncols() != d {
        return Err(HeadError::DimMismatch(format!("pooling weights do not accept width {d}")));
    }
    let x = h.data.mapv(|v| v as f64);
    let scores: Vec<f64> = x
        .rows()
        .into_iter()
        .map(|row| w.attn_proj.dot(&row).mapv(f64::tanh).dot(&w.attn_vector))
        .collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let attention = Array1::from_iter(exps.iter().map(|e| e / z));

    let mut pooled = Array1::<f64>::zeros(d);
    for (a, row) in attention.iter().zip(x.rows()) {
        pooled.scaled_add(*a, &row);
    }
    let logits = w.classifier.dot(&pooled) + &w.classifier_bias;
    let log_probs = Array1::from(log_softmax(logits.view()));
    Ok(PooledOutput {
        pooled,
        attention,
        log_probs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn seq(t: usize, d: usize, seed: u64) -> HiddenSequence {
        let mut rng = seeded_rng(seed);
        HiddenSequence {
            data: Array2::from_shape_simple_fn((t, d), || StandardNormal.sample(&mut rng)),
            frame_hop_s: 0.04,
        }
    }

    #[test]
    fn single_frame_passes_through() {
        let h = seq(1, 6, 1);
        let w = PoolingWeights::seeded(6, 4, 3, 2);
        let out = attention_pool_classify(&h, &w).unwrap();
        for (p, v) in out.pooled.iter().zip(h.data.row(0)) {
            assert_eq!(*p, *v as f64);
        }
        assert!((out.log_probs.mapv(f64::exp).sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn saturated_scores_select_one_frame() {
        // frame k carries +1 on dimension 0, all others -1; tanh saturates
        let (t, d, k) = (5, 3, 2);
        let mut h = seq(t, d, 3);
        for i in 0..t {
            h.data[[i, 0]] = if i == k { 1.0 } else { -1.0 };
        }
        let mut attn_proj = Array2::zeros((1, d));
        attn_proj[[0, 0]] = 100.0;
        let w = PoolingWeights {
            attn_proj,
            attn_vector: Array1::from(vec![15.0]),
            classifier: Array2::zeros((2, d)),
            classifier_bias: Array1::zeros(2),
        };
        // margin of 30 between frame k and the rest
        let out = attention_pool_classify(&h, &w).unwrap();
        for (p, v) in out.pooled.iter().zip(h.data.row(k)) {
            assert!((p - *v as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn pooled_equals_explicit_weighted_sum() {
        let h = seq(5, 4, 7);
        let w = PoolingWeights::seeded(4, 3, 2, 8);
        let out = attention_pool_classify(&h, &w).unwrap();
        let mut raw = Vec::new();
        for i in 0..5 {
            let mut s = 0.0;
            for a in 0..3 {
                let mut z = 0.0;
                for c in 0..4 {
                    z += w.attn_proj[[a, c]] * h.data[[i, c]] as f64;
                }
                s += w.attn_vector[a] * z.tanh();
            }
            raw.push(s.exp());
        }
        let total: f64 = raw.iter().sum();
        for c in 0..4 {
            let expected: f64 = (0..5).map(|i| raw[i] / total * h.data[[i, c]] as f64).sum();
            assert!((out.pooled[c] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn pooled_stays_in_the_hull() {
        for seed in 0..20 {
            let h = seq(7, 5, seed);
            let w = PoolingWeights::seeded(5, 4, 3, seed + 100);
            let out = attention_pool_classify(&h, &w).unwrap();
            for c in 0..5 {
                let col = h.data.column(c);
                let lo = col.iter().copied().fold(f32::INFINITY, f32::min) as f64;
                let hi = col.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
                assert!(out.pooled[c] >= lo - 1e-12 && out.pooled[c] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn empty_and_mismatched_input() {
        let w = PoolingWeights::seeded(4, 3, 2, 0);
        assert_eq!(attention_pool_classify(&seq(0, 4, 0), &w), Err(HeadError::EmptyInput));
        assert!(matches!(attention_pool_classify(&seq(3, 5, 0), &w), Err(HeadError::DimMismatch(_))));
    }
}
