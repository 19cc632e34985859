//! Frozen random-projection quantizer.
//!
//! Stacked feature frames are projected by a fixed random matrix, the
//! projection is L2-normalized and matched against a fixed codebook of unit
//! vectors. Nothing here is ever trained.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;
use crate::rng::seeded_rng;

const MAGIC: &[u8; 4] = b"BRQC";

pub const DEFAULT_VOCAB: usize = 4096;
pub const DEFAULT_CODE_DIM: usize = 16;
pub const DEFAULT_STACK: usize = 4;

#[derive(Debug, Error)]
pub enum QuantizerError {
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("malformed codebook file: {0}")]
    Format(String),
    #[error("targets line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    projection: Array2<f32>,
    codes: Array2<f32>,
    seed: u64,
}

impl Codebook {
    pub fn projection(&self) -> &Array2<f32> {
        &self.projection
    }

    /// `V × D`, unit rows.
    pub fn codes(&self) -> &Array2<f32> {
        &self.codes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn in_dim(&self) -> usize {
        self.projection.nrows()
    }

    pub fn vocab(&self) -> usize {
        self.codes.nrows()
    }

    pub fn code_dim(&self) -> usize {
        self.codes.ncols()
    }

    /// Project one stacked row (accumulated in f64).
    pub fn project(&self, row: ArrayView1<f32>) -> Vec<f64> {
        let mut out = vec![0.0f64; self.code_dim()];
        for (x, prow) in row.iter().zip(self.projection.rows()) {
            let x = *x as f64;
            for (o, p) in out.iter_mut().zip(prow.iter()) {
                *o += x * *p as f64;
            }
        }
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), QuantizerError> {
        w.write_all(MAGIC)?;
        w.write_all(&self.seed.to_le_bytes())?;
        for dim in [self.in_dim(), self.vocab(), self.code_dim()] {
            w.write_all(&(dim as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity((self.projection.len() + self.codes.len()) * 4);
        for v in self.projection.iter().chain(self.codes.iter()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, QuantizerError> {
        let mut header = [0u8; 24];
        r.read_exact(&mut header)
            .map_err(|_| QuantizerError::Format("truncated header".into()))?;
        if &header[..4] != MAGIC {
            return Err(QuantizerError::Format("bad magic".into()));
        }
        let seed = u64::from_le_bytes(header[4..12].try_into().unwrap());
        let dim = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
        let (in_dim, vocab, code_dim) = (dim(12), dim(16), dim(20));
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        let n_proj = in_dim * code_dim;
        let n_codes = vocab * code_dim;
        if body.len() != (n_proj + n_codes) * 4 {
            return Err(QuantizerError::Format(format!(
                "expected {} payload bytes, found {}",
                (n_proj + n_codes) * 4,
                body.len()
            )));
        }
        let mut values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        let proj: Vec<f32> = values.by_ref().take(n_proj).collect();
        let codes: Vec<f32> = values.collect();
        let shape_err = |e: ndarray::ShapeError| QuantizerError::Format(e.to_string());
        Ok(Self {
            projection: Array2::from_shape_vec((in_dim, code_dim), proj).map_err(shape_err)?,
            codes: Array2::from_shape_vec((vocab, code_dim), codes).map_err(shape_err)?,
            seed,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), QuantizerError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, QuantizerError> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Xavier-uniform projection and row-normalized Gaussian codes from one
/// seeded stream (projection first, row-major).
pub fn init_codebook(
    seed: u64,
    in_dim: usize,
    vocab: usize,
    code_dim: usize,
) -> Result<Codebook, QuantizerError> {
    if in_dim == 0 || vocab < 2 || code_dim == 0 {
        return Err(QuantizerError::InvalidDims(format!(
            "need in_dim >= 1, V >= 2, D >= 1; got {in_dim}, {vocab}, {code_dim}"
        )));
    }
    let mut rng = seeded_rng(seed);
    let bound = (6.0 / (in_dim + code_dim) as f64).sqrt();
    let projection =
        Array2::from_shape_simple_fn((in_dim, code_dim), || rng.random_range(-bound..=bound) as f32);

    let mut codes = Array2::<f32>::zeros((vocab, code_dim));
    let mut row = vec![0.0f64; code_dim];
    for mut code in codes.rows_mut() {
        for v in row.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (c, v) in code.iter_mut().zip(&row) {
            *c = (v / norm) as f32;
        }
    }
    Ok(Codebook {
        projection,
        codes,
        seed,
    })
}

/// Concatenate each run of `factor` consecutive frames feature-wise; a
/// trailing partial group is dropped.
pub fn stack_frames(feats: &FeatureMatrix, factor: usize) -> Result<Array2<f32>, QuantizerError> {
    stack_rows(&feats.data, factor)
}

pub fn stack_rows(frames: &Array2<f32>, factor: usize) -> Result<Array2<f32>, QuantizerError> {
    if factor == 0 {
        return Err(QuantizerError::InvalidDims("stack factor must be >= 1".into()));
    }
    let (t, f) = frames.dim();
    let groups = t / factor;
    let flat: Vec<f32> = frames
        .rows()
        .into_iter()
        .take(groups * factor)
        .flat_map(|r| r.to_vec())
        .collect();
    Ok(Array2::from_shape_vec((groups, f * factor), flat).expect("length matches shape"))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSequence {
    pub ids: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub targets: TargetSequence,
    /// Rows whose projection was exactly zero; they fall back to id 0.
    pub zero_norm_rows: usize,
}

/// Nearest code (Euclidean, ties to the lowest index) for each normalized
/// projected row.
pub fn assign_targets(stacked: &Array2<f32>, cb: &Codebook) -> Result<Assignment, QuantizerError> {
    if stacked.ncols() != cb.in_dim() {
        return Err(QuantizerError::DimMismatch {
            expected: cb.in_dim(),
            got: stacked.ncols(),
        });
    }
    let mut ids = Vec::with_capacity(stacked.nrows());
    let mut zero_norm_rows = 0;
    for row in stacked.rows() {
        let y = cb.project(row);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            // every dot product is zero, so the tie rule picks index 0
            zero_norm_rows += 1;
            ids.push(0);
            continue;
        }
        let unit: Vec<f64> = y.iter().map(|v| v / norm).collect();
        let mut best = (0usize, f64::INFINITY);
        for (k, code) in cb.codes.rows().into_iter().enumerate() {
            let d: f64 = unit
                .iter()
                .zip(code.iter())
                .map(|(u, &c)| {
                    let diff = u - c as f64;
                    diff * diff
                })
                .sum();
            if d < best.1 {
                best = (k, d);
            }
        }
        ids.push(best.0 as u32);
    }
    Ok(Assignment {
        targets: TargetSequence { ids },
        zero_norm_rows,
    })
}

/// One line of a targets JSON-lines file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetRecord {
    pub id: String,
    pub targets: Vec<u32>,
}

pub fn read_target_records<R: BufRead>(reader: R) -> Result<Vec<TargetRecord>, QuantizerError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| QuantizerError::Parse { line: i + 1, source })?,
        );
    }
    Ok(out)
}
