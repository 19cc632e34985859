//! Connectionist temporal classification, blank index 0.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{log_sum_exp, HeadError};

/// `T × (K+1)` log-probabilities (column 0 is blank) and a label sequence
/// over `1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct CtcInstance {
    pub log_probs: Array2<f64>,
    pub target: Vec<usize>,
}

/// JSON form: `{"log_probs": [[..], ..], "target": [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtcInput {
    pub log_probs: Vec<Vec<f64>>,
    pub target: Vec<usize>,
}

impl TryFrom<CtcInput> for CtcInstance {
    type Error = HeadError;

    fn try_from(input: CtcInput) -> Result<Self, HeadError> {
        let t = input.log_probs.len();
        let k = input.log_probs.first().map_or(0, Vec::len);
        if input.log_probs.iter().any(|r| r.len() != k) {
            return Err(HeadError::DimMismatch("ragged log_probs rows".into()));
        }
        let flat: Vec<f64> = input.log_probs.into_iter().flatten().collect();
        let log_probs =
            Array2::from_shape_vec((t, k), flat).map_err(|e| HeadError::DimMismatch(e.to_string()))?;
        Ok(Self {
            log_probs,
            target: input.target,
        })
    }
}

const NORM_TOL: f64 = 1e-6;

/// Frames needed to emit `target`: one per label plus a blank between
/// every pair of equal neighbours.
pub fn min_frames(target: &[usize]) -> usize {
    target.len() + target.windows(2).filter(|w| w[0] == w[1]).count()
}

/// Negative log-likelihood of `target` summed over all alignments, by the
/// forward recursion over the blank-interleaved label sequence.
pub fn ctc_loss(inst: &CtcInstance) -> Result<f64, HeadError> {
    let (frames, classes) = inst.log_probs.dim();
    let target = &inst.target;
    if target.is_empty() {
        return Err(HeadError::EmptyTarget);
    }
    if classes < 2 {
        return Err(HeadError::DimMismatch(format!("need blank plus labels, got {classes} columns")));
    }
    if let Some(&bad) = target.iter().find(|&&l| l == 0 || l >= classes) {
        return Err(HeadError::InvalidLabel {
            label: bad,
            lo: 1,
            hi: classes - 1,
        });
    }
    if inst.log_probs.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(HeadError::NonFinite);
    }
    for (row, lp) in inst.log_probs.rows().into_iter().enumerate() {
        let lse = log_sum_exp(lp.iter());
        if lse.is_nan() || lse.abs() > NORM_TOL {
            return Err(HeadError::NotNormalized { row, lse });
        }
    }
    let needed = min_frames(target);
    if frames < needed {
        return Err(HeadError::InfeasibleTarget {
            target_len: target.len(),
            needed,
            frames,
        });
    }

    // blank, l1, blank, l2, ..., lU, blank
    let mut ext = Vec::with_capacity(2 * target.len() + 1);
    ext.push(0);
    for &l in target {
        ext.push(l);
        ext.push(0);
    }
    let s_len = ext.len();
    let lp = &inst.log_probs;

    let mut alpha = vec![f64::NEG_INFINITY; s_len];
    alpha[0] = lp[[0, ext[0]]];
    alpha[1] = lp[[0, ext[1]]];
    let mut next = vec![f64::NEG_INFINITY; s_len];
    for t in 1..frames {
        for s in 0..s_len {
            let mut terms = [alpha[s], f64::NEG_INFINITY, f64::NEG_INFINITY];
            if s >= 1 {
                terms[1] = alpha[s - 1];
            }
            if s >= 2 && ext[s] != 0 && ext[s] != ext[s - 2] {
                terms[2] = alpha[s - 2];
            }
            next[s] = log_sum_exp(&terms) + lp[[t, ext[s]]];
        }
        std::mem::swap(&mut alpha, &mut next);
    }
    let ll = log_sum_exp(&[alpha[s_len - 1], alpha[s_len - 2]]);
    Ok(-ll)
}

/// Best-path decoding: per-frame argmax (ties to the lowest index), merge
/// repeats, drop blanks.
pub fn ctc_greedy_decode(log_probs: &Array2<f64>) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for row in log_probs.rows() {
        let mut best = 0;
        for (k, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = k;
            }
        }
        if Some(best) != prev && best != 0 {
            out.push(best);
        }
        prev = Some(best);
    }
    out
}
