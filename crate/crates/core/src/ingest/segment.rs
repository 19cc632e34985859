use serde::{Deserialize, Serialize};

use super::vad::{detect_speech, VadConfig};
use super::waveform::Waveform;
use super::IngestError;

/// Slack for comparing durations that went through floating-point sums.
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioSegment {
    pub source_id: String,
    pub start_s: f64,
    pub end_s: f64,
}

impl AudioSegment {
    pub fn new(source_id: impl Into<String>, start_s: f64, end_s: f64) -> Self {
        Self {
            source_id: source_id.into(),
            start_s,
            end_s,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationPolicy {
    pub merge_gap_s: f64,
    pub max_dur_s: f64,
    pub min_dur_s: f64,
}

impl Default for SegmentationPolicy {
    fn default() -> Self {
        Self {
            merge_gap_s: 0.250,
            max_dur_s: 20.0,
            min_dur_s: 1.0,
        }
    }
}

impl SegmentationPolicy {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.merge_gap_s.is_nan() || self.merge_gap_s < 0.0 {
            return Err(IngestError::InvalidPolicy(format!(
                "merge_gap_s must be >= 0, got {}",
                self.merge_gap_s
            )));
        }
        if !(self.min_dur_s > 0.0 && self.min_dur_s < self.max_dur_s) {
            return Err(IngestError::InvalidPolicy(format!(
                "need 0 < min_dur_s < max_dur_s, got {} and {}",
                self.min_dur_s, self.max_dur_s
            )));
        }
        Ok(())
    }
}

fn check_ordered(segs: &[AudioSegment]) -> Result<(), IngestError> {
    for (i, s) in segs.iter().enumerate() {
        if !(s.start_s >= 0.0 && s.start_s < s.end_s) {
            return Err(IngestError::InvalidSegments(format!(
                "segment {i} has bounds ({}, {})",
                s.start_s, s.end_s
            )));
        }
        if i > 0 {
            let prev = &segs[i - 1];
            if prev.source_id != s.source_id {
                return Err(IngestError::InvalidSegments(format!(
                    "segment {i} comes from {:?}, expected {:?}",
                    s.source_id, prev.source_id
                )));
            }
            if s.start_s < prev.end_s {
                return Err(IngestError::InvalidSegments(format!(
                    "segment {i} starts at {} before the previous end {}",
                    s.start_s, prev.end_s
                )));
            }
        }
    }
    Ok(())
}

/// Fuse consecutive segments whose gap is at most `merge_gap_s`. The fused
/// segment spans from the first start to the last end, silence included.
pub fn merge_close_segments(
    segs: &[AudioSegment],
    policy: &SegmentationPolicy,
) -> Result<Vec<AudioSegment>, IngestError> {
    policy.validate()?;
    check_ordered(segs)?;
    let mut out: Vec<AudioSegment> = Vec::with_capacity(segs.len());
    for s in segs {
        match out.last_mut() {
            Some(last) if s.start_s - last.end_s <= policy.merge_gap_s => last.end_s = s.end_s,
            _ => out.push(s.clone()),
        }
    }
    Ok(out)
}

/// Cut segments longer than `max_dur_s` into greedy left-to-right slices,
/// then drop everything shorter than `min_dur_s`.
pub fn split_and_filter(segs: &[AudioSegment], policy: &SegmentationPolicy) -> Vec<AudioSegment> {
    let mut out = Vec::with_capacity(segs.len());
    for seg in segs {
        let mut start = seg.start_s;
        while seg.end_s - start > policy.max_dur_s + EPS {
            let end = start + policy.max_dur_s;
            out.push(AudioSegment::new(seg.source_id.clone(), start, end));
            start = end;
        }
        if seg.end_s - start >= policy.min_dur_s - EPS {
            out.push(AudioSegment::new(seg.source_id.clone(), start, seg.end_s));
        }
    }
    out
}

/// VAD, merge, split and discard for one canonical recording.
pub fn segment_waveform(
    audio: &Waveform,
    source_id: &str,
    vad: &VadConfig,
    policy: &SegmentationPolicy,
) -> Result<Vec<AudioSegment>, IngestError> {
    let detected = detect_speech(audio, vad, source_id);
    let merged = merge_close_segments(&detected, policy)?;
    Ok(split_and_filter(&merged, policy))
}
