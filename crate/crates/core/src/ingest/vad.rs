use serde::{Deserialize, Serialize};

use super::segment::AudioSegment;
use super::waveform::Waveform;

/// Energy VAD settings. A frame is active when its RMS exceeds `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VadConfig {
    pub threshold: f32,
    /// Runs of at most this many inactive frames between two active frames
    /// are treated as speech.
    pub hangover_frames: usize,
    pub window_ms: f64,
    pub hop_ms: f64,
}

impl Default for VadConfig {
    fn default() -> Self {
        Self {
            threshold: 0.01,
            hangover_frames: 5,
            window_ms: 30.0,
            hop_ms: 10.0,
        }
    }
}

impl VadConfig {
    pub fn hop_s(&self) -> f64 {
        self.hop_ms / 1000.0
    }
}

/// Anything that can mark speech regions in canonical audio. Segments from
/// an external detector can also enter the pipeline through a manifest.
pub trait VoiceActivityDetector {
    fn detect(&self, audio: &Waveform, source_id: &str) -> Vec<AudioSegment>;
}

#[derive(Debug, Clone, Default)]
pub struct EnergyVad {
    pub config: VadConfig,
}

impl VoiceActivityDetector for EnergyVad {
    fn detect(&self, audio: &Waveform, source_id: &str) -> Vec<AudioSegment> {
        detect_speech(audio, &self.config, source_id)
    }
}

/// Frame-RMS voice activity detection on mono audio.
///
/// Frames are `window_ms` long every `hop_ms`; the last frame may be partial.
/// A run of active frames `a..=b` maps to `[a·hop + win − hop, (b+1)·hop)`:
/// the onset must lie in the last hop of frame `a` (frame `a−1` was quiet)
/// and the offset before frame `b+1` starts. The first and last frames of
/// the file extend to the file boundaries.
pub fn detect_speech(audio: &Waveform, vad: &VadConfig, source_id: &str) -> Vec<AudioSegment> {
    assert_eq!(audio.channels, 1, "detect_speech expects mono audio");
    let samples = &audio.samples;
    let n = samples.len();
    if n == 0 {
        return Vec::new();
    }
    let rate = audio.sample_rate as f64;
    let win = ((vad.window_ms * rate / 1000.0).round() as usize).max(1);
    let hop = ((vad.hop_ms * rate / 1000.0).round() as usize).max(1);
    let n_frames = if n <= win {
        1
    } else {
        1 + (n - win).div_ceil(hop)
    };

    let threshold = vad.threshold as f64;
    let mut active: Vec<bool> = (0..n_frames)
        .map(|i| {
            let a = i * hop;
            let b = (a + win).min(n);
            let energy: f64 = samples[a..b].iter().map(|&s| (s as f64) * (s as f64)).sum();
            (energy / (b - a) as f64).sqrt() > threshold
        })
        .collect();

    bridge_short_gaps(&mut active, vad.hangover_frames);

    let mut segments = Vec::new();
    let mut i = 0;
    while i < n_frames {
        if !active[i] {
            i += 1;
            continue;
        }
        let a = i;
        while i + 1 < n_frames && active[i + 1] {
            i += 1;
        }
        let b = i;
        i += 1;

        let mut start = if a == 0 { 0 } else { a * hop + win.saturating_sub(hop) };
        let mut end = if b == n_frames - 1 { n } else { (b + 1) * hop };
        if end <= start {
            // isolated frame: fall back to its own span
            start = a * hop;
            end = (a * hop + win).min(n);
        }
        segments.push(AudioSegment::new(
            source_id,
            start.min(n) as f64 / rate,
            end.min(n) as f64 / rate,
        ));
    }
    segments
}

fn bridge_short_gaps(active: &mut [bool], max_gap: usize) {
    if max_gap == 0 {
        return;
    }
    let mut last_active: Option<usize> = None;
    for i in 0..active.len() {
        if active[i] {
            if let Some(prev) = last_active {
                let gap = i - prev - 1;
                if gap > 0 && gap <= max_gap {
                    active[prev + 1..i].iter_mut().for_each(|a| *a = true);
                }
            }
            last_active = Some(i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(n: usize, amp: f64) -> Vec<f32> {
        (0..n)
            .map(|i| (amp * (2.0 * PI * 440.0 * i as f64 / 16_000.0).sin()) as f32)
            .collect()
    }

    #[test]
    fn silence_yields_nothing() {
        let w = Waveform::mono(vec![0.0; 32_000], 16_000);
        assert!(detect_speech(&w, &VadConfig::default(), "s").is_empty());
    }

    #[test]
    fn full_scale_tone_is_one_segment_covering_the_file() {
        let w = Waveform::mono(tone(40_000, 1.0), 16_000);
        let segs = detect_speech(&w, &VadConfig::default(), "s");
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].start_s, 0.0);
        assert!((segs[0].end_s - 2.5).abs() < 1e-12);
    }

    #[test]
    fn silence_tone_silence_is_located_within_two_hops() {
        let mut samples = vec![0.0f32; 16_000];
        samples.extend(tone(32_000, 0.5));
        samples.extend(vec![0.0f32; 16_000]);
        let w = Waveform::mono(samples, 16_000);
        let cfg = VadConfig::default();
        let segs = detect_speech(&w, &cfg, "s");
        assert_eq!(segs.len(), 1);
        let tol = 2.0 * cfg.hop_s();
        assert!((segs[0].start_s - 1.0).abs() <= tol, "{:?}", segs[0]);
        assert!((segs[0].end_s - 3.0).abs() <= tol, "{:?}", segs[0]);
    }

    #[test]
    fn hangover_bridges_short_dips_only() {
        // 1 s tone, 30 ms dip, 1 s tone, 300 ms dip, 1 s tone
        let mut samples = tone(16_000, 0.5);
        samples.extend(vec![0.0f32; 480]);
        samples.extend(tone(16_000, 0.5));
        samples.extend(vec![0.0f32; 4_800]);
        samples.extend(tone(16_000, 0.5));
        let w = Waveform::mono(samples, 16_000);
        let segs = detect_speech(&w, &VadConfig::default(), "s");
        assert_eq!(segs.len(), 2, "{segs:?}");

        let no_hangover = VadConfig {
            hangover_frames: 0,
            ..VadConfig::default()
        };
        assert_eq!(detect_speech(&w, &no_hangover, "s").len(), 3);
    }

    #[test]
    fn segments_are_ordered_and_disjoint() {
        let mut samples = Vec::new();
        for k in 0..6 {
            samples.extend(vec![0.0f32; 3_000 + 700 * k]);
            samples.extend(tone(2_000 + 900 * k, 0.3));
        }
        let w = Waveform::mono(samples, 16_000);
        let segs = detect_speech(&w, &VadConfig::default(), "s");
        assert_eq!(segs.len(), 6);
        for pair in segs.windows(2) {
            assert!(pair[0].end_s < pair[1].start_s);
        }
        for s in &segs {
            assert!(s.start_s < s.end_s);
        }
    }
}
