use std::path::Path;

use anyhow::Context;
use bestrq_core::encoder::EncoderConfig;
use bestrq_core::features::FeatureConfig;
use bestrq_core::ingest::{SegmentationPolicy, VadConfig};
use bestrq_core::masking::{DEFAULT_P_START, DEFAULT_SPAN};
use bestrq_core::quantizer::{DEFAULT_CODE_DIM, DEFAULT_STACK, DEFAULT_VOCAB};
use serde::Deserialize;

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizerSettings {
    pub vocab: usize,
    pub code_dim: usize,
    pub stack: usize,
}

impl Default for QuantizerSettings {
    fn default() -> Self {
        Self {
            vocab: DEFAULT_VOCAB,
            code_dim: DEFAULT_CODE_DIM,
            stack: DEFAULT_STACK,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskSettings {
    pub p_start: f64,
    pub span: usize,
}

impl Default for MaskSettings {
    fn default() -> Self {
        Self {
            p_start: DEFAULT_P_START,
            span: DEFAULT_SPAN,
        }
    }
}

/// Contents of `--config`; every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub vad: VadConfig,
    pub segmentation: SegmentationPolicy,
    pub features: FeatureConfig,
    pub quantizer: QuantizerSettings,
    pub masking: MaskSettings,
    /// Only consulted by `verify-streaming`; `encode` uses `--preset`.
    pub encoder: Option<EncoderConfig>,
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
        cfg.segmentation.validate().context("segmentation section")?;
        Ok(cfg)
    }
}
