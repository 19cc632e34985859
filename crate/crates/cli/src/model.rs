//! Encoder, chunking and scoring subcommands.

use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::{bail, Context, Result};
use bestrq_core::chunking::{sample_batch_specs, ChunkSpec, P_CHUNKED, P_LIMIT_LEFT};
use bestrq_core::encoder::{encode as run_encoder, verify_streaming_locality, ConvMode, EncoderConfig, EncoderWeights};
use bestrq_core::features::FeatureMatrix;
use bestrq_core::heads::{corpus_wer, ctc_greedy_decode, ctc_loss as ctc_forward, CtcInput, CtcInstance};
use bestrq_core::ingest::{content_hash, Manifest};
use bestrq_core::rng::derive_seed;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{ChunkArgs, Preset};
use crate::config::PipelineConfig;
use crate::{Outcome, UsageError};

fn json_line<T: Serialize>(out: &mut Vec<u8>, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.push(b'\n');
    Ok(())
}

pub fn chunkspec(seed: u64, count: usize) -> Result<Vec<u8>> {
    let specs = sample_batch_specs(seed, count, P_CHUNKED, P_LIMIT_LEFT)?;
    let mut out = Vec::new();
    for spec in &specs {
        json_line(&mut out, spec)?;
    }
    Ok(out)
}

fn chunk_spec(args: &ChunkArgs) -> Result<ChunkSpec> {
    let spec = match args.chunk {
        Some(c) => ChunkSpec::chunked(c, args.left),
        None => ChunkSpec::full(),
    };
    spec.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(spec)
}

#[derive(Serialize)]
struct EncodeLine<'a> {
    id: &'a str,
    frames_in: usize,
    frames_out: usize,
    d_model: usize,
    checksum: String,
}

pub fn encode(manifest: &Path, features_dir: &Path, preset: Preset, chunk: &ChunkArgs, seed: u64) -> Result<Vec<u8>> {
    let spec = chunk_spec(chunk)?;
    let m = Manifest::read(manifest).with_context(|| format!("reading {}", manifest.display()))?;
    let feats: Vec<FeatureMatrix> = m
        .records
        .par_iter()
        .map(|rec| {
            let path = features_dir.join(format!("{}.{}", rec.id, crate::pipeline::FEATURE_EXT));
            FeatureMatrix::read(&path).with_context(|| format!("reading {}", path.display()))
        })
        .collect::<Result<_>>()?;

    let mut cfg = match preset {
        Preset::Test => EncoderConfig::test_scale(),
        Preset::Base => EncoderConfig::base_300m(),
        Preset::Large => EncoderConfig::large_600m(),
    };
    cfg.seed = derive_seed(seed, "encoder");
    if let Some(f) = feats.first() {
        cfg.n_mels = f.n_feats();
    }
    let weights = EncoderWeights::new(&cfg)?;

    let hidden: Vec<_> = m
        .records
        .par_iter()
        .zip(&feats)
        .map(|(rec, f)| run_encoder(f, &spec, &weights).with_context(|| format!("record {}", rec.id)))
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    for ((rec, f), h) in m.records.iter().zip(&feats).zip(&hidden) {
        let flat: Vec<f32> = h.data.iter().copied().collect();
        json_line(
            &mut out,
            &EncodeLine {
                id: &rec.id,
                frames_in: f.n_frames(),
                frames_out: h.len(),
                d_model: h.data.ncols(),
                checksum: content_hash(&flat),
            },
        )?;
    }
    Ok(out)
}

pub fn verify_streaming(
    trials: usize,
    frames: usize,
    chunk: &ChunkArgs,
    centered: bool,
    seed: u64,
    cfg: &PipelineConfig,
) -> Result<Outcome> {
    let spec = match chunk.chunk {
        Some(_) => chunk_spec(chunk)?,
        None => ChunkSpec::chunked(8, chunk.left.or(Some(2))),
    };
    let mut enc = cfg.encoder.clone().unwrap_or_else(EncoderConfig::test_scale);
    enc.seed = derive_seed(seed, "encoder");
    if centered {
        enc.conv_mode = ConvMode::Centered;
    }
    let report = verify_streaming_locality(&enc, &spec, frames, trials, derive_seed(seed, "locality"))?;
    let failed = report.trials.iter().filter(|t| !t.passed).count();
    eprintln!(
        "bestrq: {} of {} trials within {:e}, max leakage {:e}",
        report.trials.len() - failed,
        report.trials.len(),
        report.threshold,
        report.max_leakage
    );
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    Ok(Outcome {
        bytes,
        failure: (!report.passed).then(|| format!("{failed} locality trials leaked")),
    })
}

#[derive(Serialize)]
struct CtcLine {
    loss: f64,
    decoded: Vec<usize>,
}

pub fn ctc_loss(input: &Path) -> Result<Vec<u8>> {
    let file = std::fs::File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CtcInput = serde_json::from_str(&line).with_context(|| format!("line {}", i + 1))?;
        let inst = CtcInstance::try_from(parsed).with_context(|| format!("line {}", i + 1))?;
        let loss = ctc_forward(&inst).with_context(|| format!("line {}", i + 1))?;
        json_line(
            &mut out,
            &CtcLine {
                loss,
                decoded: ctc_greedy_decode(&inst.log_probs),
            },
        )?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct WerReport {
    utterances: usize,
    edits: usize,
    ref_words: usize,
    wer: f64,
}

pub fn score_wer(reference: &Path, hyp: &Path) -> Result<Vec<u8>> {
    let read = |p: &Path| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()));
    let refs = read(reference)?;
    let hyps = read(hyp)?;
    let refs: Vec<&str> = refs.lines().collect();
    let hyps: Vec<&str> = hyps.lines().collect();
    if refs.len() != hyps.len() {
        bail!("{} reference lines but {} hypothesis lines", refs.len(), hyps.len());
    }
    if let Some(n) = refs.iter().position(|r| r.split_whitespace().next().is_none()) {
        bail!("reference line {} is empty", n + 1);
    }
    let score = corpus_wer(refs.iter().copied().zip(hyps.iter().copied()))?;
    let mut out = serde_json::to_vec_pretty(&WerReport {
        utterances: refs.len(),
        edits: score.edits,
        ref_words: score.ref_words,
        wer: score.wer,
    })?;
    out.push(b'\n');
    Ok(out)
}
