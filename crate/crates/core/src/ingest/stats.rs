use serde::{Deserialize, Serialize};

use super::manifest::Manifest;
use super::IngestError;

/// Segment-duration summary of a corpus, all values in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationStats {
    pub count: usize,
    pub total_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    pub mean_s: f64,
    pub std_s: f64,
    pub q25_s: f64,
    pub median_s: f64,
    pub q75_s: f64,
    pub q80_s: f64,
    pub q90_s: f64,
    pub q99_s: f64,
}

pub fn corpus_stats(m: &Manifest) -> Result<DurationStats, IngestError> {
    let durations: Vec<f64> = m.records.iter().map(|r| r.duration_s).collect();
    duration_stats(&durations)
}

/// Population statistics with nearest-rank percentiles.
pub fn duration_stats(durations: &[f64]) -> Result<DurationStats, IngestError> {
    if durations.is_empty() {
        return Err(IngestError::EmptyManifest);
    }
    let mut sorted = durations.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let total: f64 = sorted.iter().sum();
    let mean = total / n as f64;
    let var = sorted.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;
    Ok(DurationStats {
        count: n,
        total_s: total,
        min_s: sorted[0],
        max_s: sorted[n - 1],
        mean_s: mean,
        std_s: var.sqrt(),
        q25_s: nearest_rank(&sorted, 25),
        median_s: nearest_rank(&sorted, 50),
        q75_s: nearest_rank(&sorted, 75),
        q80_s: nearest_rank(&sorted, 80),
        q90_s: nearest_rank(&sorted, 90),
        q99_s: nearest_rank(&sorted, 99),
    })
}

/// Nearest-rank percentile of ascending data: the element at 1-based rank
/// `ceil(percent/100 · n)`, computed in integers.
pub fn nearest_rank(sorted: &[f64], percent: u32) -> f64 {
    assert!(!sorted.is_empty() && percent <= 100);
    let n = sorted.len();
    let rank = (percent as usize * n).div_ceil(100).max(1);
    sorted[rank - 1]
}
