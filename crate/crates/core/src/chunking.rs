//! Dynamic chunk training: per-batch chunk configurations and the
//! self-attention masks they induce.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive_seed, seeded_rng};

pub const CHUNK_FRAMES_MIN: usize = 8;
pub const CHUNK_FRAMES_MAX: usize = 32;
pub const LEFT_CHUNKS_MIN: usize = 2;
pub const LEFT_CHUNKS_MAX: usize = 32;
pub const P_CHUNKED: f64 = 0.6;
pub const P_LIMIT_LEFT: f64 = 0.75;

#[derive(Debug, Error, PartialEq)]
pub enum ChunkError {
    #[error("invalid chunk spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkMode {
    Full,
    Chunked,
}

/// One sampled configuration, shared by every utterance of a batch.
/// `left_context_chunks == None` means unlimited left context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkSpec {
    pub mode: ChunkMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_frames: Option<usize>,
    #[serde(default)]
    pub left_context_chunks: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl ChunkSpec {
    pub fn full() -> Self {
        Self {
            mode: ChunkMode::Full,
            chunk_frames: None,
            left_context_chunks: None,
            seed: 0,
        }
    }

    /// Any sizes are accepted here; `validate` checks the training ranges.
    pub fn chunked(chunk_frames: usize, left_context_chunks: Option<usize>) -> Self {
        Self {
            mode: ChunkMode::Chunked,
            chunk_frames: Some(chunk_frames),
            left_context_chunks,
            seed: 0,
        }
    }

    pub fn is_chunked(&self) -> bool {
        self.mode == ChunkMode::Chunked
    }

    pub fn validate(&self) -> Result<(), ChunkError> {
        match self.mode {
            ChunkMode::Full => Ok(()),
            ChunkMode::Chunked => {
                let c = self
                    .chunk_frames
                    .ok_or_else(|| ChunkError::InvalidSpec("chunked mode needs chunk_frames".into()))?;
                if !(CHUNK_FRAMES_MIN..=CHUNK_FRAMES_MAX).contains(&c) {
                    return Err(ChunkError::InvalidSpec(format!(
                        "chunk_frames {c} outside [{CHUNK_FRAMES_MIN}, {CHUNK_FRAMES_MAX}]"
                    )));
                }
                if let Some(l) = self.left_context_chunks {
                    if !(LEFT_CHUNKS_MIN..=LEFT_CHUNKS_MAX).contains(&l) {
                        return Err(ChunkError::InvalidSpec(format!(
                            "left_context_chunks {l} outside [{LEFT_CHUNKS_MIN}, {LEFT_CHUNKS_MAX}]"
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

/// With probability `p_chunked` pick chunked mode with a uniform chunk size
/// in `[8, 32]`; a chunked spec then limits its left context with
/// probability `p_limit` to a uniform `[2, 32]` chunks.
pub fn sample_chunk_spec(seed: u64, p_chunked: f64, p_limit: f64) -> Result<ChunkSpec, ChunkError> {
    for (name, p) in [("p_chunked", p_chunked), ("p_limit", p_limit)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(ChunkError::InvalidSpec(format!("{name} {p} outside [0, 1]")));
        }
    }
    let mut rng = seeded_rng(seed);
    let mut spec = if rng.random::<f64>() < p_chunked {
        let chunk = rng.random_range(CHUNK_FRAMES_MIN..=CHUNK_FRAMES_MAX);
        let left = (rng.random::<f64>() < p_limit)
            .then(|| rng.random_range(LEFT_CHUNKS_MIN..=LEFT_CHUNKS_MAX));
        ChunkSpec::chunked(chunk, left)
    } else {
        ChunkSpec::full()
    };
    spec.seed = seed;
    Ok(spec)
}

/// Specs for consecutive batches, each drawn from a seed derived from
/// `(seed, batch index)`.
pub fn sample_batch_specs(
    seed: u64,
    n_batches: usize,
    p_chunked: f64,
    p_limit: f64,
) -> Result<Vec<ChunkSpec>, ChunkError> {
    (0..n_batches)
        .map(|b| sample_chunk_spec(derive_seed(seed, &format!("batch{b}")), p_chunked, p_limit))
        .collect()
}

/// Row-major `T × T` attendability matrix: `allowed(i, j)` says whether
/// query `i` may attend to key `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionMask {
    n: usize,
    allowed: Vec<bool>,
}

impl AttentionMask {
    pub fn all_true(n: usize) -> Self {
        Self {
            n,
            allowed: vec![true; n * n],
        }
    }

    pub fn all_false(n: usize) -> Self {
        Self {
            n,
            allowed: vec![false; n * n],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn allowed(&self, i: usize, j: usize) -> bool {
        self.allowed[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.allowed[i * self.n + j] = value;
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.allowed[i * self.n..(i + 1) * self.n]
    }

    pub fn count_true(&self) -> usize {
        self.allowed.iter().filter(|&&a| a).count()
    }
}

/// Full mode allows everything. Chunked mode lets position `i` see `j`
/// iff `chunk(j)` lies in `[chunk(i) − L, chunk(i)]`, with
/// `chunk(k) = k / chunk_frames`; unlimited left context drops the lower
/// bound.
pub fn build_attention_mask(n_frames: usize, spec: &ChunkSpec) -> AttentionMask {
    let chunk = match (spec.mode, spec.chunk_frames) {
        (ChunkMode::Chunked, Some(c)) if c > 0 => c,
        _ => return AttentionMask::all_true(n_frames),
    };
    let mut mask = AttentionMask::all_false(n_frames);
    for i in 0..n_frames {
        let ci = i / chunk;
        let lo_chunk = match spec.left_context_chunks {
            Some(l) => ci.saturating_sub(l),
            None => 0,
        };
        let lo = lo_chunk * chunk;
        let hi = ((ci + 1) * chunk).min(n_frames);
        for j in lo..hi {
            mask.set(i, j, true);
        }
    }
    mask
}
