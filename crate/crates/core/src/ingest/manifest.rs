use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::segment::AudioSegment;
use super::IngestError;

/// One line of the JSON-lines manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub id: String,
    pub source_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dialect: Option<String>,
    /// 16 hex digits; `None` for records imported from external tools.
    #[serde(default)]
    pub content_hash: Option<String>,
}

fn round_us(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

impl ManifestRecord {
    /// Build a record from a segment and the canonical samples it covers.
    /// Times are rounded to microseconds so the written form round-trips.
    pub fn from_segment(id: impl Into<String>, seg: &AudioSegment, samples: &[f32]) -> Self {
        let start_s = round_us(seg.start_s);
        let end_s = round_us(seg.end_s);
        Self {
            id: id.into(),
            source_id: seg.source_id.clone(),
            start_s,
            end_s,
            duration_s: round_us(end_s - start_s),
            dialect: None,
            content_hash: Some(content_hash(samples)),
        }
    }

    pub fn segment(&self) -> AudioSegment {
        AudioSegment::new(self.source_id.clone(), self.start_s, self.end_s)
    }

    /// Serialize with fixed six-digit decimals for every time field.
    pub fn to_json_line(&self) -> String {
        let quote = |s: &str| serde_json::to_string(s).expect("strings always serialize");
        let mut line = format!(
            "{{\"id\":{},\"source_id\":{},\"start_s\":{:.6},\"end_s\":{:.6},\"duration_s\":{:.6}",
            quote(&self.id),
            quote(&self.source_id),
            self.start_s,
            self.end_s,
            self.duration_s
        );
        if let Some(d) = &self.dialect {
            line.push_str(&format!(",\"dialect\":{}", quote(d)));
        }
        match &self.content_hash {
            Some(h) => line.push_str(&format!(",\"content_hash\":{}}}", quote(h))),
            None => line.push_str(",\"content_hash\":null}"),
        }
        line
    }

    fn check(&self) -> Result<(), IngestError> {
        let ok_bounds = self.start_s.is_finite()
            && self.end_s.is_finite()
            && 0.0 <= self.start_s
            && self.start_s < self.end_s;
        if !ok_bounds {
            return Err(IngestError::InvalidManifest(format!(
                "record {} has bounds ({}, {})",
                self.id, self.start_s, self.end_s
            )));
        }
        if (self.duration_s - (self.end_s - self.start_s)).abs() > 1e-6 {
            return Err(IngestError::InvalidManifest(format!(
                "record {} duration {} disagrees with its bounds",
                self.id, self.duration_s
            )));
        }
        Ok(())
    }
}

/// 64-bit content identity of canonical samples: the leading eight bytes of
/// SHA-256 over the little-endian `f32` encoding, as 16 hex digits.
pub fn content_hash(samples: &[f32]) -> String {
    let mut hasher = Sha256::new();
    for s in samples {
        hasher.update(s.to_le_bytes());
    }
    let digest = hasher.finalize();
    let v = u64::from_be_bytes(digest[..8].try_into().expect("digest has 32 bytes"));
    format!("{v:016x}")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn new(records: Vec<ManifestRecord>) -> Self {
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Ids unique, bounds sane, durations consistent.
    pub fn validate(&self) -> Result<(), IngestError> {
        let mut ids = HashSet::with_capacity(self.records.len());
        for r in &self.records {
            r.check()?;
            if !ids.insert(r.id.as_str()) {
                return Err(IngestError::InvalidManifest(format!("duplicate id {}", r.id)));
            }
        }
        Ok(())
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, IngestError> {
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ManifestRecord = serde_json::from_str(&line)
                .map_err(|source| IngestError::Parse { line: i + 1, source })?;
            records.push(rec);
        }
        let m = Self { records };
        m.validate()?;
        Ok(m)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn write_to<W: Write>(&self, mut writer: W) -> Result<(), IngestError> {
        for r in &self.records {
            writeln!(writer, "{}", r.to_json_line())?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("manifest lines are UTF-8")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DedupReport {
    pub kept: usize,
    pub removed: usize,
    pub removed_ids: Vec<String>,
}

/// Keep the first record for every content hash, preserving order.
pub fn dedup_manifest(m: &Manifest) -> Result<(Manifest, DedupReport), IngestError> {
    let mut seen = HashSet::new();
    let mut kept = Vec::with_capacity(m.records.len());
    let mut report = DedupReport::default();
    for r in &m.records {
        let hash = r
            .content_hash
            .as_deref()
            .ok_or_else(|| IngestError::MissingHash(r.id.clone()))?;
        if seen.insert(hash) {
            kept.push(r.clone());
        } else {
            report.removed_ids.push(r.id.clone());
        }
    }
    report.kept = kept.len();
    report.removed = report.removed_ids.len();
    Ok((Manifest::new(kept), report))
}
