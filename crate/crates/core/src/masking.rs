//! Span masking over feature frames.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;
use crate::rng::seeded_rng;

pub const DEFAULT_SPAN: usize = 4;
pub const DEFAULT_P_START: f64 = 0.15;
/// Standard deviation of the noise written into masked frames.
pub const MASK_NOISE_STD: f32 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum MaskingError {
    #[error("invalid mask parameters: {0}")]
    InvalidParams(String),
    #[error("mask covers {plan} frames but features have {feats}")]
    DimMismatch { plan: usize, feats: usize },
}

fn default_p_start() -> f64 {
    DEFAULT_P_START
}

/// Sampled span starts. Serialized as `{n_frames, span, starts}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskPlan {
    pub n_frames: usize,
    pub span: usize,
    pub starts: Vec<usize>,
    #[serde(skip, default = "default_p_start")]
    pub p_start: f64,
    #[serde(skip)]
    pub seed: u64,
}

impl MaskPlan {
    /// Per-frame membership in the union of `[s, min(s + span, n_frames))`.
    pub fn masked(&self) -> Vec<bool> {
        let mut out = vec![false; self.n_frames];
        for &s in &self.starts {
            let end = (s + self.span).min(self.n_frames);
            out[s..end].iter_mut().for_each(|m| *m = true);
        }
        out
    }

    pub fn masked_count(&self) -> usize {
        self.masked().into_iter().filter(|&m| m).count()
    }

    pub fn covered_fraction(&self) -> f64 {
        if self.n_frames == 0 {
            0.0
        } else {
            self.masked_count() as f64 / self.n_frames as f64
        }
    }

    /// Target positions touched by a masked frame when frames are grouped
    /// `stack` at a time; positions `>= n_targets` are dropped.
    pub fn masked_targets(&self, stack: usize, n_targets: usize) -> Vec<usize> {
        assert!(stack >= 1);
        let mut out: Vec<usize> = self
            .masked()
            .into_iter()
            .enumerate()
            .filter(|&(_, m)| m)
            .map(|(i, _)| i / stack)
            .filter(|&j| j < n_targets)
            .collect();
        out.dedup();
        out
    }

    pub fn validate(&self) -> Result<(), MaskingError> {
        if self.span == 0 {
            return Err(MaskingError::InvalidParams("span must be >= 1".into()));
        }
        if self.starts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MaskingError::InvalidParams("starts must be strictly increasing".into()));
        }
        if self.starts.last().is_some_and(|&s| s >= self.n_frames) {
            return Err(MaskingError::InvalidParams("start beyond the last frame".into()));
        }
        Ok(())
    }
}

/// Each frame independently becomes a span start with probability
/// `p_start`; spans may overlap.
pub fn sample_mask(
    n_frames: usize,
    p_start: f64,
    span: usize,
    seed: u64,
) -> Result<MaskPlan, MaskingError> {
    if !(0.0..=1.0).contains(&p_start) {
        return Err(MaskingError::InvalidParams(format!("p_start {p_start} outside [0, 1]")));
    }
    if span == 0 {
        return Err(MaskingError::InvalidParams("span must be >= 1".into()));
    }
    let mut rng = seeded_rng(seed);
    let starts = (0..n_frames)
        .filter(|_| rng.random::<f64>() < p_start)
        .collect();
    Ok(MaskPlan {
        n_frames,
        span,
        starts,
        p_start,
        seed,
    })
}

/// Replace masked frames with N(0, 0.1²) noise drawn row-major from
/// `noise_seed`; other frames are copied untouched.
pub fn apply_mask(
    feats: &FeatureMatrix,
    plan: &MaskPlan,
    noise_seed: u64,
) -> Result<FeatureMatrix, MaskingError> {
    if plan.n_frames != feats.n_frames() {
        return Err(MaskingError::DimMismatch {
            plan: plan.n_frames,
            feats: feats.n_frames(),
        });
    }
    let mut rng = seeded_rng(noise_seed);
    let noise = Normal::new(0.0f32, MASK_NOISE_STD).expect("positive std");
    let mut out = feats.clone();
    for (mut row, masked) in out.data.rows_mut().into_iter().zip(plan.masked()) {
        if masked {
            row.iter_mut().for_each(|v| *v = noise.sample(&mut rng));
        }
    }
    Ok(out)
}
