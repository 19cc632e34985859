//! Synthetic corpora with known speech intervals, and helpers for running
//! the binary.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bestrq_core::ingest::{wav::write_wav_pcm16, Waveform};
use bestrq_core::rng::{seeded_rng, SeededRng};
use rand::Rng;

pub const MERGE_GAP_S: f64 = 0.25;
pub const MAX_DUR_S: f64 = 20.0;
pub const MIN_DUR_S: f64 = 1.0;
pub const VAD_HOP_S: f64 = 0.010;

/// Keeps generated intervals this far away from every decision threshold.
const MARGIN_S: f64 = 0.06;

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_bestrq"))
}

pub fn run<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(bin()).args(args).output().expect("binary runs")
}

#[derive(Debug, Clone)]
pub struct SynthFile {
    pub source_id: String,
    pub sample_rate: u32,
    pub channels: u16,
    pub duration_s: f64,
    /// Tone intervals in seconds, ordered and disjoint.
    pub speech: Vec<(f64, f64)>,
}

/// Merge close intervals, cut long ones into fixed slices and drop short
/// leftovers, written from scratch for comparison.
pub fn oracle_segments(speech: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for &(a, b) in speech {
        match merged.last_mut() {
            Some(last) if a - last.1 <= MERGE_GAP_S => last.1 = b,
            _ => merged.push((a, b)),
        }
    }
    let mut out = Vec::new();
    for (a, b) in merged {
        let n_full = ((b - a) / MAX_DUR_S).ceil() as usize - 1;
        for k in 0..n_full {
            out.push((a + k as f64 * MAX_DUR_S, a + (k + 1) as f64 * MAX_DUR_S));
        }
        let tail = (a + n_full as f64 * MAX_DUR_S, b);
        if tail.1 - tail.0 >= MIN_DUR_S {
            out.push(tail);
        }
    }
    out
}

/// True when a boundary error of a few hops could change the oracle result.
fn ambiguous(speech: &[(f64, f64)]) -> bool {
    let near = |x: f64, y: f64| (x - y).abs() < MARGIN_S;
    if speech.windows(2).any(|w| near(w[1].0 - w[0].1, MERGE_GAP_S)) {
        return true;
    }
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for &(a, b) in speech {
        match merged.last_mut() {
            Some(last) if a - last.1 <= MERGE_GAP_S => last.1 = b,
            _ => merged.push((a, b)),
        }
    }
    merged.iter().any(|&(a, b)| {
        let d = b - a;
        let rem = d - ((d / MAX_DUR_S).ceil() - 1.0).max(0.0) * MAX_DUR_S;
        (1..=4).any(|k| near(d, k as f64 * MAX_DUR_S)) || near(rem, MIN_DUR_S)
    })
}

fn plan_file(rng: &mut SeededRng, source_id: String, allow_long: bool) -> SynthFile {
    let sample_rate = match rng.random_range(0..10) {
        0 => 8_000,
        1 => 22_050,
        2 => 44_100,
        3 => 48_000,
        _ => 16_000,
    };
    let channels = if rng.random_bool(0.2) { 2 } else { 1 };
    loop {
        let mut t = rng.random_range(0.3..1.5);
        let mut speech = Vec::new();
        for _ in 0..rng.random_range(1..=5) {
            let dur = match rng.random_range(0..10) {
                0..=2 => rng.random_range(0.3..0.9),
                9 if allow_long => rng.random_range(21.0..45.0),
                _ => rng.random_range(1.2..8.0),
            };
            speech.push((t, t + dur));
            let gap = if rng.random_bool(0.3) {
                rng.random_range(0.08..0.15)
            } else {
                rng.random_range(0.45..2.0)
            };
            t += dur + gap;
        }
        let duration_s = speech.last().expect("at least one burst").1 + rng.random_range(0.3..1.5);
        if !ambiguous(&speech) {
            return SynthFile {
                source_id,
                sample_rate,
                channels,
                duration_s,
                speech,
            };
        }
    }
}

/// Quiet noise everywhere plus a tone inside each speech interval.
pub fn render(file: &SynthFile, rng: &mut SeededRng) -> Waveform {
    let sr = file.sample_rate as f64;
    let n = (file.duration_s * sr).round() as usize;
    let mut mono: Vec<f32> = (0..n).map(|_| rng.random_range(-0.002..0.002)).collect();
    for &(a, b) in &file.speech {
        let freq = rng.random_range(150.0..900.0);
        let (i0, i1) = ((a * sr).round() as usize, ((b * sr).round() as usize).min(n));
        for (i, s) in mono.iter_mut().enumerate().take(i1).skip(i0) {
            *s += (0.3 * (std::f64::consts::TAU * freq * i as f64 / sr).sin()) as f32;
        }
    }
    let channels = file.channels as usize;
    let samples = mono.iter().flat_map(|&s| std::iter::repeat_n(s, channels)).collect();
    Waveform {
        samples,
        sample_rate: file.sample_rate,
        channels: file.channels,
    }
}

/// Write `n` files named `src000.wav`, ... into `dir`.
pub fn write_corpus(dir: &Path, n: usize, seed: u64, allow_long: bool) -> Vec<SynthFile> {
    let mut rng = seeded_rng(seed);
    (0..n)
        .map(|i| {
            let file = plan_file(&mut rng, format!("src{i:03}"), allow_long);
            let audio = render(&file, &mut rng);
            write_wav_pcm16(dir.join(format!("{}.wav", file.source_id)), &audio).expect("wav written");
            file
        })
        .collect()
}

/// Silence, a 2 s tone, silence; 4 s at 16 kHz.
pub fn write_tone_wav(path: &Path) {
    let sr = 16_000usize;
    let samples = (0..4 * sr)
        .map(|i| {
            if (sr..3 * sr).contains(&i) {
                0.5 * (std::f32::consts::TAU * 440.0 * i as f32 / sr as f32).sin()
            } else {
                0.0
            }
        })
        .collect();
    write_wav_pcm16(path, &Waveform::mono(samples, sr as u32)).expect("wav written");
}

