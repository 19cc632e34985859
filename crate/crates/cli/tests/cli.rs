mod support;

use std::fs;

use serde_json::Value;
use support::{run, write_corpus, write_tone_wav};
use tempfile::tempdir;

fn stdout_json(out: &std::process::Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn json_lines(bytes: &[u8]) -> Vec<Value> {
    std::str::from_utf8(bytes)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn stats_of_three_records() {
    let dir = tempdir().unwrap();
    let manifest = dir.path().join("m.jsonl");
    let lines: Vec<String> = (1..=3)
        .map(|d| {
            format!(
                r#"{{"id":"r{d}","source_id":"s","start_s":{s}.0,"end_s":{e}.0,"duration_s":{d}.0,"content_hash":null}}"#,
                s = 10 * d,
                e = 10 * d + d
            )
        })
        .collect();
    fs::write(&manifest, lines.join("\n")).unwrap();
    let stats = stdout_json(&run(["stats".as_ref(), manifest.as_os_str()]));
    assert_eq!(stats["mean_s"], 2.0);
    assert_eq!(stats["count"], 3);
}

#[test]
fn unknown_flag_is_a_usage_error_and_writes_nothing() {
    let dir = tempdir().unwrap();
    let out_path = dir.path().join("out.json");
    let out = run(["stats".as_ref(), "m.jsonl".as_ref(), "--no-such-flag".as_ref(), "--out".as_ref(), out_path.as_os_str()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_path.exists());
    assert!(out.stdout.is_empty());
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"not_a_section": 1}"#).unwrap();
    let out = run(["--config".as_ref(), cfg.as_os_str(), "chunkspec".as_ref()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_is_a_data_error() {
    let out = run(["stats", "/nonexistent/manifest.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn version_is_one_semver_line() {
    let out = run(["--version"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let version = text.trim().rsplit(' ').next().unwrap();
    assert_eq!(text.lines().count(), 1);
    assert_eq!(version.split('.').count(), 3);
    assert!(version.split('.').all(|p| p.parse::<u32>().is_ok()));
}

#[test]
fn segment_finds_the_tone() {
    let dir = tempdir().unwrap();
    let wavs = dir.path().join("wav");
    fs::create_dir(&wavs).unwrap();
    write_tone_wav(&wavs.join("tone.wav"));
    let out = run(["segment".as_ref(), wavs.as_os_str()]);
    assert!(out.status.success());
    let records = json_lines(&out.stdout);
    assert_eq!(records.len(), 1);
    let r = &records[0];
    assert_eq!(r["source_id"], "tone");
    assert!((r["start_s"].as_f64().unwrap() - 1.0).abs() <= 0.02);
    assert!((r["end_s"].as_f64().unwrap() - 3.0).abs() <= 0.02);
    assert_eq!(r["content_hash"].as_str().unwrap().len(), 16);
}

#[test]
fn pipeline_stages_compose() {
    let dir = tempdir().unwrap();
    let p = dir.path();
    let wavs = p.join("wav");
    fs::create_dir(&wavs).unwrap();
    write_corpus(&wavs, 3, 11, false);
    let manifest = p.join("m.jsonl");
    let feats = p.join("feats");
    let s = |x: &std::path::Path| x.to_str().unwrap().to_owned();

    assert!(run(["segment", &s(&wavs), "--out", &s(&manifest)]).status.success());
    let n_records = fs::read_to_string(&manifest).unwrap().lines().count();
    assert!(n_records > 0);

    let out = run(["featurize", &s(&manifest), "--audio-dir", &s(&wavs), "--out-dir", &s(&feats), "--jobs", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let index = json_lines(&out.stdout);
    assert_eq!(index.len(), n_records);

    let out = run(["targets", &s(&manifest), "--features-dir", &s(&feats)]);
    assert!(out.status.success());
    for (t, f) in json_lines(&out.stdout).iter().zip(&index) {
        assert_eq!(t["id"], f["id"]);
        let n = t["targets"].as_array().unwrap().len() as u64;
        assert_eq!(n, f["n_frames"].as_u64().unwrap() / 4);
        assert!(t["targets"].as_array().unwrap().iter().all(|v| v.as_u64().unwrap() < 4096));
    }

    let out = run(["maskplan", &s(&manifest), "--features-dir", &s(&feats)]);
    assert!(out.status.success());
    for (m, f) in json_lines(&out.stdout).iter().zip(&index) {
        assert_eq!(m["n_frames"], f["n_frames"]);
        assert_eq!(m["span"], 4);
        let keys: Vec<&String> = m.as_object().unwrap().keys().collect();
        assert_eq!(keys.len(), 4);
    }

    let out = run(["encode", &s(&manifest), "--features-dir", &s(&feats), "--chunk", "8", "--left", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for (e, f) in json_lines(&out.stdout).iter().zip(&index) {
        let t = f["n_frames"].as_u64().unwrap();
        assert_eq!(e["frames_out"].as_u64().unwrap(), t.div_ceil(4));
        assert_eq!(e["d_model"], 64);
    }

    let out = run(["dedup", &s(&manifest)]);
    assert!(out.status.success());
    assert_eq!(json_lines(&out.stdout).len(), n_records);
}

#[test]
fn codebook_file_feeds_targets() {
    let dir = tempdir().unwrap();
    let p = dir.path();
    let wavs = p.join("wav");
    fs::create_dir(&wavs).unwrap();
    write_tone_wav(&wavs.join("tone.wav"));
    let s = |x: &std::path::Path| x.to_str().unwrap().to_owned();
    let (manifest, feats, cb) = (p.join("m.jsonl"), p.join("f"), p.join("cb.brqc"));
    assert!(run(["segment", &s(&wavs), "--out", &s(&manifest)]).status.success());
    assert!(run(["featurize", &s(&manifest), "--audio-dir", &s(&wavs), "--out-dir", &s(&feats)]).status.success());
    assert!(run(["--seed", "3", "codebook", "--out", &s(&cb)]).status.success());
    let from_file = run(["targets", &s(&manifest), "--features-dir", &s(&feats), "--codebook", &s(&cb)]);
    let from_seed = run(["--seed", "3", "targets", &s(&manifest), "--features-dir", &s(&feats)]);
    assert!(from_file.status.success() && from_seed.status.success());
    assert_eq!(from_file.stdout, from_seed.stdout);
}

#[test]
fn chunkspec_is_seeded() {
    let a = run(["--seed", "5", "chunkspec", "--count", "20"]);
    let b = run(["--seed", "5", "chunkspec", "--count", "20"]);
    let c = run(["--seed", "6", "chunkspec", "--count", "20"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    assert_eq!(json_lines(&a.stdout).len(), 20);
}

#[test]
fn ctc_loss_from_json_lines() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("ctc.jsonl");
    let h = -std::f64::consts::LN_2;
    fs::write(
        &input,
        format!("{{\"log_probs\":[[{h},{h}],[{h},{h}]],\"target\":[1]}}\n{{\"log_probs\":[[{h},{h}]],\"target\":[1,1]}}\n"),
    )
    .unwrap();
    let out = run(["ctc-loss".as_ref(), input.as_os_str()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    fs::write(&input, format!("{{\"log_probs\":[[{h},{h}],[{h},{h}]],\"target\":[1]}}\n")).unwrap();
    let out = run(["ctc-loss".as_ref(), input.as_os_str()]);
    let lines = json_lines(&out.stdout);
    assert!((lines[0]["loss"].as_f64().unwrap() + 0.75f64.ln()).abs() < 1e-12);
}

#[test]
fn score_wer_on_aligned_lines() {
    let dir = tempdir().unwrap();
    let (r, h) = (dir.path().join("ref.txt"), dir.path().join("hyp.txt"));
    fs::write(&r, "a b c\nd e\n").unwrap();
    fs::write(&h, "a x c\nd e f\n").unwrap();
    let report = stdout_json(&run(["score-wer".as_ref(), "--ref".as_ref(), r.as_os_str(), "--hyp".as_ref(), h.as_os_str()]));
    assert_eq!(report["edits"], 2);
    assert_eq!(report["ref_words"], 5);
    assert!((report["wer"].as_f64().unwrap() - 0.4).abs() < 1e-15);

    fs::write(&h, "a b c\n").unwrap();
    let out = run(["score-wer".as_ref(), "--ref".as_ref(), r.as_os_str(), "--hyp".as_ref(), h.as_os_str()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_streaming_verdicts() {
    let ok = run(["verify-streaming", "--trials", "5", "--frames", "40"]);
    assert_eq!(ok.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(report["passed"], true);

    let leaky = run(["verify-streaming", "--trials", "10", "--frames", "40", "--centered"]);
    assert_eq!(leaky.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&leaky.stdout).unwrap();
    assert_eq!(report["passed"], false);
}
