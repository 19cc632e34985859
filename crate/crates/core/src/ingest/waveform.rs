use super::resample::SincResampler;
use super::IngestError;

pub const CANONICAL_RATE: u32 = 16_000;
pub const SUPPORTED_RATES: [u32; 5] = [8_000, 16_000, 22_050, 44_100, 48_000];

/// Interleaved PCM samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub channels: u16,
}

impl Waveform {
    pub fn mono(samples: Vec<f32>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
            channels: 1,
        }
    }

    /// Samples per channel.
    pub fn n_frames(&self) -> usize {
        if self.channels == 0 {
            0
        } else {
            self.samples.len() / self.channels as usize
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.n_frames() as f64 / self.sample_rate as f64
    }

    pub fn is_canonical(&self) -> bool {
        self.channels == 1 && self.sample_rate == CANONICAL_RATE
    }

    /// Mono samples in `[start_s, end_s)`, clamped to the recording.
    pub fn slice_seconds(&self, start_s: f64, end_s: f64) -> &[f32] {
        assert_eq!(self.channels, 1, "slice_seconds expects mono audio");
        let rate = self.sample_rate as f64;
        let n = self.samples.len();
        let a = ((start_s * rate).round().max(0.0) as usize).min(n);
        let b = ((end_s * rate).round().max(0.0) as usize).clamp(a, n);
        &self.samples[a..b]
    }
}

/// Convert to mono 16 kHz. Channels are averaged before resampling; input
/// that is already canonical is returned unchanged.
pub fn canonicalize(audio: &Waveform) -> Result<Waveform, IngestError> {
    if audio.samples.is_empty() {
        return Err(IngestError::EmptyAudio);
    }
    if audio.channels == 0 || !audio.samples.len().is_multiple_of(audio.channels as usize) {
        return Err(IngestError::InvalidChannels(format!(
            "{} samples do not divide into {} channels",
            audio.samples.len(),
            audio.channels
        )));
    }
    if !SUPPORTED_RATES.contains(&audio.sample_rate) {
        return Err(IngestError::UnsupportedRate(audio.sample_rate));
    }
    if audio.is_canonical() {
        return Ok(audio.clone());
    }

    let mono = downmix(&audio.samples, audio.channels as usize);
    let samples = if audio.sample_rate == CANONICAL_RATE {
        mono
    } else {
        SincResampler::new(audio.sample_rate, CANONICAL_RATE).process(&mono)
    };
    Ok(Waveform::mono(samples, CANONICAL_RATE))
}

fn downmix(interleaved: &[f32], channels: usize) -> Vec<f32> {
    if channels == 1 {
        return interleaved.to_vec();
    }
    interleaved
        .chunks_exact(channels)
        .map(|frame| (frame.iter().map(|&s| s as f64).sum::<f64>() / channels as f64) as f32)
        .collect()
}
