//! Data-preparation subcommands: segmentation through mask plans.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use bestrq_core::features::{log_mel, FeatureMatrix};
use bestrq_core::ingest::{
    canonicalize, content_hash, corpus_stats, dedup_manifest, segment_waveform, wav::read_wav, Manifest,
    ManifestRecord, Waveform,
};
use bestrq_core::masking::{sample_mask, MaskPlan};
use bestrq_core::quantizer::{assign_targets, init_codebook, stack_frames, Codebook, TargetRecord};
use bestrq_core::rng::derive_seed;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::UsageError;

pub const FEATURE_EXT: &str = "brqf";

fn wav_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let is_wav = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
        if !is_wav || !path.is_file() {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| anyhow!("non UTF-8 file name {}", path.display()))?
            .to_owned();
        files.push((stem, path));
    }
    files.sort();
    if let Some(w) = files.windows(2).find(|w| w[0].0 == w[1].0) {
        bail!("two audio files share the source id {:?}", w[0].0);
    }
    Ok(files)
}

fn load_canonical(path: &Path) -> Result<Waveform> {
    let raw = read_wav(path).with_context(|| format!("reading {}", path.display()))?;
    canonicalize(&raw).with_context(|| format!("canonicalizing {}", path.display()))
}

pub fn segment(wav_dir: &Path, cfg: &PipelineConfig) -> Result<Vec<u8>> {
    let files = wav_files(wav_dir)?;
    if files.is_empty() {
        eprintln!("bestrq: no WAV files in {}", wav_dir.display());
    }
    let per_file: Vec<Vec<ManifestRecord>> = files
        .par_iter()
        .map(|(source_id, path)| {
            let audio = load_canonical(path)?;
            let segments = segment_waveform(&audio, source_id, &cfg.vad, &cfg.segmentation)
                .with_context(|| format!("segmenting {}", path.display()))?;
            Ok(segments
                .iter()
                .enumerate()
                .map(|(k, seg)| {
                    let samples = audio.slice_seconds(seg.start_s, seg.end_s);
                    ManifestRecord::from_segment(format!("{source_id}-{k:04}"), seg, samples)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let manifest = Manifest::new(per_file.into_iter().flatten().collect());
    eprintln!("bestrq: {} segments from {} files", manifest.len(), files.len());
    Ok(manifest.to_jsonl().into_bytes())
}

pub fn stats(manifest: &Path) -> Result<Vec<u8>> {
    let m = Manifest::read(manifest).with_context(|| format!("reading {}", manifest.display()))?;
    let stats = corpus_stats(&m)?;
    let mut out = serde_json::to_vec_pretty(&stats)?;
    out.push(b'\n');
    Ok(out)
}

pub fn dedup(manifest: &Path) -> Result<Vec<u8>> {
    let m = Manifest::read(manifest).with_context(|| format!("reading {}", manifest.display()))?;
    let (kept, report) = dedup_manifest(&m)?;
    eprintln!("bestrq: kept {}, removed {}", report.kept, report.removed);
    Ok(kept.to_jsonl().into_bytes())
}

/// Record ids become file names, so they must be a single path component.
fn checked_id(id: &str) -> Result<&str> {
    let plain = !id.is_empty()
        && id != "."
        && id != ".."
        && !id.contains(['/', '\\'])
        && Path::new(id).file_name().is_some_and(|f| f == id);
    if !plain {
        bail!("record id {id:?} is not usable as a file name");
    }
    Ok(id)
}

fn feature_path(dir: &Path, id: &str) -> Result<PathBuf> {
    Ok(dir.join(format!("{}.{FEATURE_EXT}", checked_id(id)?)))
}

#[derive(Serialize)]
struct FeatureIndexLine<'a> {
    id: &'a str,
    n_frames: usize,
    n_feats: usize,
}

pub fn featurize(manifest: &Path, audio_dir: &Path, out_dir: &Path, cfg: &PipelineConfig) -> Result<Vec<u8>> {
    let m = Manifest::read(manifest).with_context(|| format!("reading {}", manifest.display()))?;
    cfg.features
        .validate(bestrq_core::ingest::CANONICAL_RATE)
        .map_err(|e| UsageError(format!("features section: {e}")))?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let sources: BTreeSet<&str> = m.records.iter().map(|r| r.source_id.as_str()).collect();
    let audio: HashMap<&str, Waveform> = sources
        .into_par_iter()
        .map(|s| {
            let path = audio_dir.join(format!("{s}.wav"));
            Ok((s, load_canonical(&path)?))
        })
        .collect::<Result<_>>()?;

    let shapes: Vec<(usize, usize)> = m
        .records
        .par_iter()
        .map(|rec| {
            let wave = &audio[rec.source_id.as_str()];
            let samples = wave.slice_seconds(rec.start_s, rec.end_s);
            if let Some(expected) = &rec.content_hash {
                if content_hash(samples) != *expected {
                    bail!("audio for record {} no longer matches its content hash", rec.id);
                }
            }
            let clip = Waveform::mono(samples.to_vec(), wave.sample_rate);
            let feats = log_mel(&clip, &cfg.features).with_context(|| format!("record {}", rec.id))?;
            let path = feature_path(out_dir, &rec.id)?;
            feats.write(&path).with_context(|| format!("writing {}", path.display()))?;
            Ok((feats.n_frames(), feats.n_feats()))
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    for (rec, (n_frames, n_feats)) in m.records.iter().zip(shapes) {
        serde_json::to_writer(
            &mut out,
            &FeatureIndexLine {
                id: &rec.id,
                n_frames,
                n_feats,
            },
        )?;
        out.push(b'\n');
    }
    Ok(out)
}

fn read_features(dir: &Path, id: &str) -> Result<FeatureMatrix> {
    let path = feature_path(dir, id)?;
    FeatureMatrix::read(&path).with_context(|| format!("reading {}", path.display()))
}

fn seeded_codebook(seed: u64, in_dim: usize, cfg: &PipelineConfig) -> Result<Codebook> {
    let q = cfg.quantizer;
    init_codebook(derive_seed(seed, "codebook"), in_dim, q.vocab, q.code_dim)
        .map_err(|e| UsageError(format!("quantizer section: {e}")).into())
}

pub fn codebook(seed: u64, in_dim: Option<usize>, cfg: &PipelineConfig) -> Result<Vec<u8>> {
    let in_dim = in_dim.unwrap_or(cfg.features.n_mels * cfg.quantizer.stack);
    let cb = seeded_codebook(seed, in_dim, cfg)?;
    let mut out = Vec::new();
    cb.write_to(&mut out)?;
    Ok(out)
}

pub fn targets(
    manifest: &Path,
    features_dir: &Path,
    codebook: Option<&Path>,
    seed: u64,
    cfg: &PipelineConfig,
) -> Result<Vec<u8>> {
    let m = Manifest::read(manifest).with_context(|| format!("reading {}", manifest.display()))?;
    let stack = cfg.quantizer.stack;
    if stack == 0 {
        return Err(UsageError("quantizer.stack must be at least 1".into()).into());
    }
    let feats: Vec<FeatureMatrix> = m
        .records
        .par_iter()
        .map(|rec| read_features(features_dir, &rec.id))
        .collect::<Result<_>>()?;

    let cb = match codebook {
        Some(path) => Codebook::read(path).with_context(|| format!("reading {}", path.display()))?,
        None => {
            let n_feats = feats.first().map_or(cfg.features.n_mels, FeatureMatrix::n_feats);
            seeded_codebook(seed, n_feats * stack, cfg)?
        }
    };

    let assigned: Vec<(Vec<u32>, usize)> = m
        .records
        .par_iter()
        .zip(&feats)
        .map(|(rec, f)| {
            let stacked = stack_frames(f, stack)?;
            let a = assign_targets(&stacked, &cb).with_context(|| format!("record {}", rec.id))?;
            Ok((a.targets.ids, a.zero_norm_rows))
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    let mut zero_rows = 0;
    for (rec, (ids, zeros)) in m.records.iter().zip(assigned) {
        zero_rows += zeros;
        serde_json::to_writer(
            &mut out,
            &TargetRecord {
                id: rec.id.clone(),
                targets: ids,
            },
        )?;
        out.push(b'\n');
    }
    if zero_rows > 0 {
        eprintln!("bestrq: {zero_rows} stacked rows projected to zero and were assigned id 0");
    }
    Ok(out)
}

#[derive(Serialize)]
struct MaskPlanLine<'a> {
    id: &'a str,
    #[serde(flatten)]
    plan: &'a MaskPlan,
}

pub fn maskplan(manifest: &Path, features_dir: &Path, seed: u64, cfg: &PipelineConfig) -> Result<Vec<u8>> {
    let m = Manifest::read(manifest).with_context(|| format!("reading {}", manifest.display()))?;
    let settings = cfg.masking;
    let plans: Vec<MaskPlan> = m
        .records
        .par_iter()
        .map(|rec| {
            let n_frames = read_features(features_dir, &rec.id)?.n_frames();
            let record_seed = derive_seed(seed, &format!("mask/{}", rec.id));
            sample_mask(n_frames, settings.p_start, settings.span, record_seed)
                .map_err(|e| UsageError(format!("masking section: {e}")).into())
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    for (rec, plan) in m.records.iter().zip(&plans) {
        serde_json::to_writer(&mut out, &MaskPlanLine { id: &rec.id, plan })?;
        out.push(b'\n');
    }
    Ok(out)
}
