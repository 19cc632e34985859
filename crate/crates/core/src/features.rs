//! Log-mel front-end and the `BRQF` feature file format.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Waveform;

const MAGIC: &[u8; 4] = b"BRQF";

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("audio has {samples} samples, shorter than one {window}-sample window")]
    TooShort { samples: usize, window: usize },
    #[error("invalid feature config: {0}")]
    InvalidConfig(String),
    #[error("malformed feature file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub n_mels: usize,
    pub win_ms: f64,
    pub hop_ms: f64,
    pub fmin: f64,
    pub fmax: f64,
    pub log_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            n_mels: 80,
            win_ms: 25.0,
            hop_ms: 10.0,
            fmin: 0.0,
            fmax: 8000.0,
            log_floor: 1e-10,
        }
    }
}

impl FeatureConfig {
    pub fn window_samples(&self, sample_rate: u32) -> usize {
        (self.win_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        (self.hop_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    /// `1 + floor((n − win) / hop)`, or 0 when `n < win`.
    pub fn frame_count(&self, n_samples: usize, sample_rate: u32) -> usize {
        let win = self.window_samples(sample_rate);
        let hop = self.hop_samples(sample_rate);
        if n_samples < win || hop == 0 {
            0
        } else {
            1 + (n_samples - win) / hop
        }
    }

    pub fn validate(&self, sample_rate: u32) -> Result<(), FeatureError> {
        let bad = |msg: String| Err(FeatureError::InvalidConfig(msg));
        if self.n_mels == 0 {
            return bad("n_mels must be positive".into());
        }
        if !(self.hop_ms > 0.0 && self.hop_ms <= self.win_ms) {
            return bad(format!("need 0 < hop_ms <= win_ms, got {} / {}", self.hop_ms, self.win_ms));
        }
        if self.hop_samples(sample_rate) == 0 {
            return bad("hop rounds to zero samples".into());
        }
        let nyquist = sample_rate as f64 / 2.0;
        if !(0.0 <= self.fmin && self.fmin < self.fmax && self.fmax <= nyquist) {
            return bad(format!(
                "need 0 <= fmin < fmax <= {nyquist}, got {} / {}",
                self.fmin, self.fmax
            ));
        }
        if self.log_floor.is_nan() || self.log_floor <= 0.0 {
            return bad("log_floor must be positive".into());
        }
        Ok(())
    }
}

/// `T × F` log-mel energies, row-major by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub data: Array2<f32>,
    pub frame_hop_s: f32,
    pub config: FeatureConfig,
}

impl FeatureMatrix {
    pub fn n_frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_feats(&self) -> usize {
        self.data.ncols()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), FeatureError> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.n_frames() as u32).to_le_bytes())?;
        w.write_all(&(self.n_feats() as u32).to_le_bytes())?;
        w.write_all(&self.frame_hop_s.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for v in self.data.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// Parse a `BRQF` stream. The file carries no front-end settings, so
    /// `config` is the default with `n_mels` set to the stored width.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self, FeatureError> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)
            .map_err(|_| FeatureError::Format("truncated header".into()))?;
        if &header[..4] != MAGIC {
            return Err(FeatureError::Format("bad magic".into()));
        }
        let t = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let f = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let hop = f32::from_le_bytes(header[12..16].try_into().unwrap());
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() != t * f * 4 {
            return Err(FeatureError::Format(format!(
                "expected {} payload bytes for {t}x{f}, found {}",
                t * f * 4,
                body.len()
            )));
        }
        let values: Vec<f32> = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let data = Array2::from_shape_vec((t, f), values)
            .map_err(|e| FeatureError::Format(e.to_string()))?;
        Ok(Self {
            data,
            frame_hop_s: hop,
            config: FeatureConfig {
                n_mels: f,
                ..FeatureConfig::default()
            },
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), FeatureError> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, FeatureError> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular HTK-scale filters over the bins of an `n_fft`-point DFT.
/// Each row is scaled to unit sum.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    pub weights: Array2<f64>,
}

impl MelFilterbank {
    pub fn new(cfg: &FeatureConfig, sample_rate: u32, n_fft: usize) -> Result<Self, FeatureError> {
        let n_bins = n_fft / 2 + 1;
        let mel_lo = hz_to_mel(cfg.fmin);
        let mel_hi = hz_to_mel(cfg.fmax);
        let step = (mel_hi - mel_lo) / (cfg.n_mels + 1) as f64;
        let edges: Vec<f64> = (0..cfg.n_mels + 2)
            .map(|i| mel_to_hz(mel_lo + i as f64 * step))
            .collect();
        let bin_hz = sample_rate as f64 / n_fft as f64;

        let mut weights = Array2::<f64>::zeros((cfg.n_mels, n_bins));
        for m in 0..cfg.n_mels {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            let mut row = weights.row_mut(m);
            for (k, w) in row.iter_mut().enumerate() {
                let f = k as f64 * bin_hz;
                *w = if f > left && f <= center {
                    (f - left) / (center - left)
                } else if f > center && f < right {
                    (right - f) / (right - center)
                } else {
                    0.0
                };
            }
            let sum = row.sum();
            if sum <= 0.0 {
                return Err(FeatureError::InvalidConfig(format!(
                    "mel filter {m} covers no DFT bin; use fewer mels or a longer window"
                )));
            }
            row.mapv_inplace(|w| w / sum);
        }
        Ok(Self { weights })
    }
}

/// Hann-windowed power spectrum through an HTK mel filterbank, natural log
/// with a floor.
pub fn log_mel(audio: &Waveform, cfg: &FeatureConfig) -> Result<FeatureMatrix, FeatureError> {
    assert_eq!(audio.channels, 1, "log_mel expects mono audio");
    let rate = audio.sample_rate;
    cfg.validate(rate)?;
    let win = cfg.window_samples(rate);
    let hop = cfg.hop_samples(rate);
    let n = audio.samples.len();
    if n < win || win == 0 {
        return Err(FeatureError::TooShort {
            samples: n,
            window: win,
        });
    }
    let n_fft = win.next_power_of_two();
    let bank = MelFilterbank::new(cfg, rate, n_fft)?;
    let n_bins = n_fft / 2 + 1;
    let window: Vec<f64> = (0..win)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / win as f64).cos())
        .collect();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);

    let n_frames = cfg.frame_count(n, rate);
    let floor_log = cfg.log_floor.ln();
    let mut data = Array2::<f32>::zeros((n_frames, cfg.n_mels));
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut power = vec![0.0f64; n_bins];
    for t in 0..n_frames {
        let frame = &audio.samples[t * hop..t * hop + win];
        for (slot, (&s, &w)) in buf.iter_mut().zip(frame.iter().zip(&window)) {
            *slot = Complex::new(s as f64 * w, 0.0);
        }
        buf[win..].iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p = c.norm_sqr();
        }
        for (m, out) in data.row_mut(t).iter_mut().enumerate() {
            let e: f64 = bank.weights.row(m).iter().zip(&power).map(|(w, p)| w * p).sum();
            *out = if e > cfg.log_floor { e.ln() } else { floor_log } as f32;
        }
    }
    Ok(FeatureMatrix {
        data,
        frame_hop_s: (hop as f64 / rate as f64) as f32,
        config: *cfg,
    })
}
