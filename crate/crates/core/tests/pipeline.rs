use bestrq_core::chunking::{build_attention_mask, ChunkSpec};
use bestrq_core::encoder::{encode, EncoderConfig, EncoderWeights};
use bestrq_core::features::{log_mel, FeatureConfig, FeatureMatrix};
use bestrq_core::heads::{
    attention_pool_classify, ctc_greedy_decode, ctc_loss, log_softmax, masked_prediction_loss, CtcInstance,
    PoolingWeights,
};
use bestrq_core::ingest::{
    canonicalize, dedup_manifest, segment_waveform, Manifest, ManifestRecord, SegmentationPolicy, VadConfig,
    Waveform,
};
use bestrq_core::masking::{apply_mask, sample_mask};
use bestrq_core::quantizer::{assign_targets, init_codebook, stack_frames};
use bestrq_core::rng::seeded_rng;
use ndarray::Array2;
use rand::Rng;

/// 48 kHz stereo: 0.5 s silence, 1.5 s tone, 0.1 s gap, 1.0 s tone, 0.7 s silence.
fn recording() -> Waveform {
    let sr = 48_000.0;
    let n = (3.8 * sr) as usize;
    let mut samples = Vec::with_capacity(2 * n);
    for i in 0..n {
        let t = i as f64 / sr;
        let on = (0.5..2.0).contains(&t) || (2.1..3.1).contains(&t);
        let v = if on { 0.4 * (std::f64::consts::TAU * 300.0 * t).sin() } else { 0.0 } as f32;
        samples.extend([v, v]);
    }
    Waveform {
        samples,
        sample_rate: 48_000,
        channels: 2,
    }
}

#[test]
fn audio_to_masked_prediction_loss() {
    let audio = canonicalize(&recording()).unwrap();
    assert_eq!(audio.sample_rate, 16_000);
    let segs = segment_waveform(&audio, "rec", &VadConfig::default(), &SegmentationPolicy::default()).unwrap();
    assert_eq!(segs.len(), 1, "{segs:?}");
    assert!((segs[0].start_s - 0.5).abs() <= 0.02 && (segs[0].end_s - 3.1).abs() <= 0.02);

    let records: Vec<ManifestRecord> = segs
        .iter()
        .enumerate()
        .map(|(i, s)| ManifestRecord::from_segment(format!("rec-{i}"), s, audio.slice_seconds(s.start_s, s.end_s)))
        .collect();
    let manifest = Manifest::from_reader(Manifest::new(records).to_jsonl().as_bytes()).unwrap();
    let (kept, report) = dedup_manifest(&manifest).unwrap();
    assert_eq!(report.removed, 0);

    let rec = &kept.records[0];
    let clip = Waveform::mono(audio.slice_seconds(rec.start_s, rec.end_s).to_vec(), 16_000);
    let feats = log_mel(&clip, &FeatureConfig::default()).unwrap();
    let feats = FeatureMatrix::read_from(feats.to_bytes().as_slice()).unwrap();

    let cb = init_codebook(1, 320, 4096, 16).unwrap();
    let targets = assign_targets(&stack_frames(&feats, 4).unwrap(), &cb).unwrap().targets;
    assert_eq!(targets.ids.len(), feats.n_frames() / 4);

    let plan = sample_mask(feats.n_frames(), 0.15, 4, 2).unwrap();
    let masked = apply_mask(&feats, &plan, 3).unwrap();
    let changed = (0..feats.n_frames())
        .filter(|&i| masked.data.row(i) != feats.data.row(i))
        .count();
    assert_eq!(changed, plan.masked_count());

    let logits = Array2::zeros((targets.ids.len(), 4096));
    let loss = masked_prediction_loss(&logits, &targets, &plan, 4).unwrap();
    assert!((loss - 4096f64.ln()).abs() < 1e-9);
}

#[test]
fn encoder_output_feeds_the_heads() {
    let mut rng = seeded_rng(4);
    let feats = FeatureMatrix {
        data: Array2::from_shape_simple_fn((101, 80), || rng.random_range(-1.0..1.0)),
        frame_hop_s: 0.01,
        config: FeatureConfig::default(),
    };
    let weights = EncoderWeights::new(&EncoderConfig::test_scale()).unwrap();
    let h = encode(&feats, &ChunkSpec::chunked(8, Some(2)), &weights).unwrap();
    assert_eq!(h.len(), 26);
    assert_eq!(build_attention_mask(h.len(), &ChunkSpec::full()).count_true(), 26 * 26);

    // project to 4 classes (blank + 3) and score a short target
    let proj = Array2::from_shape_simple_fn((64, 4), || rng.random_range(-0.5..0.5));
    let logits = h.data.mapv(f64::from).dot(&proj);
    let mut log_probs = Array2::zeros(logits.dim());
    for (mut out, row) in log_probs.rows_mut().into_iter().zip(logits.rows()) {
        out.assign(&ndarray::Array1::from(log_softmax(row)));
    }
    let loss = ctc_loss(&CtcInstance {
        log_probs: log_probs.clone(),
        target: vec![1, 2, 2, 3],
    })
    .unwrap();
    assert!(loss.is_finite() && loss > 0.0);
    assert!(ctc_greedy_decode(&log_probs).iter().all(|&l| (1..4).contains(&l)));

    let pooled = attention_pool_classify(&h, &PoolingWeights::seeded(64, 32, 5, 9)).unwrap();
    assert_eq!(pooled.log_probs.len(), 5);
    assert!((pooled.attention.sum() - 1.0).abs() < 1e-12);
}
