//! Forward-only downstream heads and scoring.

mod ctc;
mod pooling;
mod wer;

use ndarray::{Array2, ArrayView1};
use thiserror::Error;

use crate::masking::MaskPlan;
use crate::quantizer::TargetSequence;

pub use ctc::{ctc_greedy_decode, ctc_loss, CtcInput, CtcInstance};
pub use pooling::{attention_pool_classify, PooledOutput, PoolingWeights};
pub use wer::{corpus_wer, edit_distance, tokenize, wer, WerScore};

#[derive(Debug, Error, PartialEq)]
pub enum HeadError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("no masked target positions")]
    EmptyMaskedSet,
    #[error("label {label} outside [{lo}, {hi}]")]
    InvalidLabel { label: usize, lo: usize, hi: usize },
    #[error("target of length {target_len} needs at least {needed} frames, got {frames}")]
    InfeasibleTarget {
        target_len: usize,
        needed: usize,
        frames: usize,
    },
    #[error("row {row} of the log-probabilities does not sum to one (log-sum-exp {lse})")]
    NotNormalized { row: usize, lse: f64 },
    #[error("empty target sequence")]
    EmptyTarget,
    #[error("empty input")]
    EmptyInput,
    #[error("empty reference")]
    EmptyReference,
    #[error("non-finite input")]
    NonFinite,
}

/// `T' × V` unnormalized scores.
pub type LogitsMatrix = Array2<f64>;

pub(crate) fn log_sum_exp<'a>(values: impl IntoIterator<Item = &'a f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().copied().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn log_softmax(row: ArrayView1<f64>) -> Vec<f64> {
    let lse = log_sum_exp(row.iter());
    row.iter().map(|v| v - lse).collect()
}

/// Mean cross-entropy over the target positions touched by masked frames
/// (frame `i` maps to target `i / stack`).
pub fn masked_prediction_loss(
    logits: &LogitsMatrix,
    targets: &TargetSequence,
    plan: &MaskPlan,
    stack: usize,
) -> Result<f64, HeadError> {
    if logits.nrows() != targets.ids.len() {
        return Err(HeadError::DimMismatch(format!(
            "{} logit rows for {} targets",
            logits.nrows(),
            targets.ids.len()
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(HeadError::NonFinite);
    }
    let positions = plan.masked_targets(stack, targets.ids.len());
    if positions.is_empty() {
        return Err(HeadError::EmptyMaskedSet);
    }
    let vocab = logits.ncols();
    let mut total = 0.0;
    for &j in &positions {
        let t = targets.ids[j] as usize;
        if t >= vocab {
            return Err(HeadError::InvalidLabel {
                label: t,
                lo: 0,
                hi: vocab.saturating_sub(1),
            });
        }
        let row = logits.row(j);
        total += log_sum_exp(row.iter()) - row[t];
    }
    Ok(total / positions.len() as f64)
}
