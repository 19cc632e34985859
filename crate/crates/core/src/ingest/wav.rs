//! RIFF WAV input/output (PCM 16-bit or 32-bit float).

use std::path::Path;

use super::waveform::Waveform;
use super::IngestError;

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform, IngestError> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let samples = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32_768.0))
            .collect::<Result<Vec<_>, _>>()?,
        (hound::SampleFormat::Float, 32) => {
            reader.samples::<f32>().collect::<Result<Vec<_>, _>>()?
        }
        (fmt, bits) => {
            return Err(IngestError::UnsupportedWav(format!("{fmt:?} {bits}-bit")));
        }
    };
    Ok(Waveform {
        samples,
        sample_rate: spec.sample_rate,
        channels: spec.channels,
    })
}

/// Write 16-bit PCM; samples are clipped to `[-1, 1]`.
pub fn write_wav_pcm16(path: impl AsRef<Path>, audio: &Waveform) -> Result<(), IngestError> {
    let spec = hound::WavSpec {
        channels: audio.channels,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in &audio.samples {
        let v = (s.clamp(-1.0, 1.0) * 32_767.0).round() as i16;
        writer.write_sample(v)?;
    }
    writer.finalize()?;
    Ok(())
}

pub fn write_wav_f32(path: impl AsRef<Path>, audio: &Waveform) -> Result<(), IngestError> {
    let spec = hound::WavSpec {
        channels: audio.channels,
        sample_rate: audio.sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in &audio.samples {
        writer.write_sample(s)?;
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let w = Waveform {
            samples: vec![0.0, 0.25, -0.5, 0.125, 1.0, -1.0],
            sample_rate: 22_050,
            channels: 2,
        };
        write_wav_f32(&path, &w).unwrap();
        assert_eq!(read_wav(&path).unwrap(), w);
    }

    #[test]
    fn pcm16_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let w = Waveform::mono(vec![0.0, 0.3, -0.7, 0.999], 16_000);
        write_wav_pcm16(&path, &w).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate, 16_000);
        for (a, b) in back.samples.iter().zip(&w.samples) {
            assert!((a - b).abs() < 1.0 / 16_000.0);
        }
    }
}
