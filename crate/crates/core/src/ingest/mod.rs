//! Raw recordings to a deduplicated manifest of speech segments.
//!
//! The flow is `canonicalize` (mono, 16 kHz) → `detect_speech` (energy VAD)
//! → `merge_close_segments` → `split_and_filter`, after which each surviving
//! segment becomes a [`ManifestRecord`] keyed by a hash of its samples.

mod manifest;
mod resample;
mod segment;
mod stats;
mod vad;
mod waveform;
pub mod wav;

use thiserror::Error;

pub use manifest::{content_hash, dedup_manifest, DedupReport, Manifest, ManifestRecord};
pub use resample::SincResampler;
pub use segment::{
    merge_close_segments, segment_waveform, split_and_filter, AudioSegment, SegmentationPolicy,
};
pub use stats::{corpus_stats, duration_stats, nearest_rank, DurationStats};
pub use vad::{detect_speech, EnergyVad, VadConfig, VoiceActivityDetector};
pub use waveform::{canonicalize, Waveform, CANONICAL_RATE, SUPPORTED_RATES};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("audio contains no samples")]
    EmptyAudio,
    #[error("unsupported sample rate {0} Hz")]
    UnsupportedRate(u32),
    #[error("invalid channel layout: {0}")]
    InvalidChannels(String),
    #[error("invalid segments: {0}")]
    InvalidSegments(String),
    #[error("invalid segmentation policy: {0}")]
    InvalidPolicy(String),
    #[error("record {0} has no content hash")]
    MissingHash(String),
    #[error("manifest is empty")]
    EmptyManifest,
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("manifest line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedWav(String),
    #[error(transparent)]
    Wav(#[from] hound::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
