use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::chunking::{build_attention_mask, AttentionMask, ChunkSpec};
use crate::rng::seeded_rng;

use super::{conformer_forward, EncoderConfig, EncoderError, EncoderWeights, HiddenSequence, LEAKAGE_THRESHOLD};

/// Input frames that may influence output row `row` of an `n_layers` stack
/// with a causal depthwise kernel of `conv_kernel` taps.
///
/// Walking backwards through one layer: the conv output at `p` reads
/// attention outputs in `[p − kernel + 1, p]`, and the attention output at
/// `q` reads every input frame `mask` allows for `q`.
pub fn dependency_set(mask: &AttentionMask, n_layers: usize, conv_kernel: usize, row: usize) -> Vec<bool> {
    let n = mask.len();
    let mut deps = vec![false; n];
    deps[row] = true;
    for _ in 0..n_layers {
        let mut conv = vec![false; n];
        for p in (0..n).filter(|&p| deps[p]) {
            let lo = p.saturating_sub(conv_kernel.saturating_sub(1));
            conv[lo..=p].iter_mut().for_each(|d| *d = true);
        }
        let mut next = vec![false; n];
        for q in (0..n).filter(|&q| conv[q]) {
            next[q] = true;
            for (j, allowed) in mask.row(q).iter().enumerate() {
                if *allowed {
                    next[j] = true;
                }
            }
        }
        deps = next;
    }
    deps
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalityTrial {
    pub row: usize,
    /// Number of frames perturbed (everything outside the dependency set).
    pub perturbed: usize,
    pub leakage: f32,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalityReport {
    pub n_frames: usize,
    pub threshold: f32,
    pub trials: Vec<LocalityTrial>,
    pub max_leakage: f32,
    pub passed: bool,
}

/// Perturbation check of streaming locality.
///
/// Each trial draws a random input and a random output row, adds unit
/// Gaussian noise to every frame outside that row's dependency set (derived
/// from the mask and a causal conv), and records the max-abs change of the
/// row. A full-context spec leaves nothing to perturb, so its trials compare
/// two identical forwards.
pub fn verify_streaming_locality(
    cfg: &EncoderConfig,
    spec: &ChunkSpec,
    n_frames: usize,
    trials: usize,
    seed: u64,
) -> Result<LocalityReport, EncoderError> {
    if n_frames == 0 {
        return Err(EncoderError::EmptyInput);
    }
    let weights = EncoderWeights::new(cfg)?;
    let mask = build_attention_mask(n_frames, spec);
    let mut rng = seeded_rng(seed);

    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let base = HiddenSequence {
            data: Array2::from_shape_simple_fn((n_frames, cfg.d_model), || StandardNormal.sample(&mut rng)),
            frame_hop_s: 0.04,
        };
        let row = rng.random_range(0..n_frames);
        let deps = dependency_set(&mask, cfg.n_layers, cfg.conv_kernel, row);

        let mut perturbed = base.clone();
        let mut count = 0;
        for (j, dep) in deps.iter().enumerate() {
            if !dep {
                count += 1;
                for v in perturbed.data.row_mut(j) {
                    *v += Distribution::<f32>::sample(&StandardNormal, &mut rng);
                }
            }
        }

        let a = conformer_forward(&base, &mask, &weights)?;
        let b = conformer_forward(&perturbed, &mask, &weights)?;
        let leakage = a
            .data
            .row(row)
            .iter()
            .zip(b.data.row(row))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f32, f32::max);
        out.push(LocalityTrial {
            row,
            perturbed: count,
            leakage,
            passed: leakage < LEAKAGE_THRESHOLD,
        });
    }

    let max_leakage = out.iter().map(|t| t.leakage).fold(0.0f32, f32::max);
    Ok(LocalityReport {
        n_frames,
        threshold: LEAKAGE_THRESHOLD,
        passed: out.iter().all(|t| t.passed),
        trials: out,
        max_leakage,
    })
}
