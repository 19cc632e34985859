//! Seeded, forward-only conformer encoder.
//!
//! Weights are regenerated from `(config, seed)` and never persisted. The
//! encoder exists to check shapes and to show that dynamic-chunk masks
//! really bound what each output frame can see.

mod layers;
mod locality;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunking::{build_attention_mask, AttentionMask, ChunkSpec};
use crate::features::FeatureMatrix;
use crate::rng::seeded_rng;

use layers::{ConvFrontend, ConvModule, FeedForward, LayerNorm, RelPosAttention};

pub use locality::{dependency_set, verify_streaming_locality, LocalityReport, LocalityTrial};

/// Leakage above this max-abs difference counts as a streaming violation.
pub const LEAKAGE_THRESHOLD: f32 = 1e-5;

#[derive(Debug, Error, PartialEq)]
pub enum EncoderError {
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
    #[error("empty input")]
    EmptyInput,
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("non-finite value in encoder output")]
    NumericalError,
}

/// Depthwise convolution alignment. `Centered` reads future frames and only
/// exists to demonstrate leakage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvMode {
    #[default]
    Causal,
    Centered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ffn: usize,
    pub conv_kernel: usize,
    pub subsample_factor: usize,
    pub n_mels: usize,
    pub frontend_channels: usize,
    pub rel_pos_clip: usize,
    pub conv_mode: ConvMode,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self::test_scale()
    }
}

impl EncoderConfig {
    /// Small configuration used by the test suite.
    pub fn test_scale() -> Self {
        Self {
            n_layers: 2,
            d_model: 64,
            n_heads: 4,
            d_ffn: 128,
            conv_kernel: 15,
            subsample_factor: 4,
            n_mels: 80,
            frontend_channels: 8,
            rel_pos_clip: 64,
            conv_mode: ConvMode::Causal,
            seed: 0,
        }
    }

    /// 24 layers, width 848, 8 heads, feed-forward 2048.
    pub fn base_300m() -> Self {
        Self {
            n_layers: 24,
            d_model: 848,
            n_heads: 8,
            d_ffn: 2048,
            frontend_channels: 64,
            ..Self::test_scale()
        }
    }

    /// 24 layers, width 1024, 8 heads, feed-forward 4096.
    pub fn large_600m() -> Self {
        Self {
            d_model: 1024,
            d_ffn: 4096,
            ..Self::base_300m()
        }
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |m: String| Err(EncoderError::InvalidConfig(m));
        if self.n_layers == 0 || self.d_model == 0 || self.n_heads == 0 || self.d_ffn == 0 {
            return bad("layer count and widths must be positive".into());
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return bad(format!(
                "d_model {} not divisible by {} heads",
                self.d_model, self.n_heads
            ));
        }
        if self.subsample_factor != 4 {
            return bad(format!(
                "subsample_factor must be 4 (two stride-2 blocks), got {}",
                self.subsample_factor
            ));
        }
        if self.conv_kernel == 0 || self.n_mels == 0 || self.frontend_channels == 0 {
            return bad("conv_kernel, n_mels and frontend_channels must be positive".into());
        }
        Ok(())
    }

    /// `ceil(T / 4)`.
    pub fn output_len(&self, n_frames: usize) -> usize {
        n_frames.div_ceil(self.subsample_factor)
    }
}

#[derive(Debug, Clone)]
struct ConformerLayer {
    ff1: FeedForward,
    attn: RelPosAttention,
    conv: ConvModule,
    ff2: FeedForward,
    norm_out: LayerNorm,
}

impl ConformerLayer {
    fn forward(&self, x: &Array2<f32>, mask: &AttentionMask, mode: ConvMode) -> Array2<f32> {
        let x = x + &(self.ff1.forward(x) * 0.5);
        let x = &x + &self.attn.forward(&x, mask);
        let x = &x + &self.conv.forward(&x, mode);
        let x = &x + &(self.ff2.forward(&x) * 0.5);
        self.norm_out.forward(&x)
    }
}

/// All encoder parameters, drawn in a fixed order from the config seed.
#[derive(Debug, Clone)]
pub struct EncoderWeights {
    config: EncoderConfig,
    frontend: ConvFrontend,
    layers: Vec<ConformerLayer>,
}

impl EncoderWeights {
    pub fn new(config: &EncoderConfig) -> Result<Self, EncoderError> {
        config.validate()?;
        let mut rng = seeded_rng(config.seed);
        let frontend = ConvFrontend::new(
            &mut rng,
            config.n_mels,
            config.frontend_channels,
            config.d_model,
        );
        let layers = (0..config.n_layers)
            .map(|_| ConformerLayer {
                ff1: FeedForward::new(&mut rng, config.d_model, config.d_ffn),
                attn: RelPosAttention::new(&mut rng, config.d_model, config.n_heads, config.rel_pos_clip),
                conv: ConvModule::new(&mut rng, config.d_model, config.conv_kernel),
                ff2: FeedForward::new(&mut rng, config.d_model, config.d_ffn),
                norm_out: LayerNorm::new(config.d_model),
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            frontend,
            layers,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }
}

/// `T' × d_model` encoder frames.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenSequence {
    pub data: Array2<f32>,
    pub frame_hop_s: f32,
}

impl HiddenSequence {
    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }
}

/// Two stride-2 conv blocks then a projection to `d_model`; the output has
/// `ceil(T/4)` frames.
pub fn conv_frontend(feats: &FeatureMatrix, w: &EncoderWeights) -> Result<HiddenSequence, EncoderError> {
    if feats.n_frames() == 0 {
        return Err(EncoderError::EmptyInput);
    }
    if feats.n_feats() != w.config.n_mels {
        return Err(EncoderError::DimMismatch(format!(
            "features have {} bins, encoder expects {}",
            feats.n_feats(),
            w.config.n_mels
        )));
    }
    let data = w.frontend.forward(&feats.data);
    Ok(HiddenSequence {
        data,
        frame_hop_s: feats.frame_hop_s * w.config.subsample_factor as f32,
    })
}

/// Run every conformer layer under `mask`.
pub fn conformer_forward(
    h: &HiddenSequence,
    mask: &AttentionMask,
    w: &EncoderWeights,
) -> Result<HiddenSequence, EncoderError> {
    if h.data.ncols() != w.config.d_model {
        return Err(EncoderError::DimMismatch(format!(
            "hidden width {} != d_model {}",
            h.data.ncols(),
            w.config.d_model
        )));
    }
    if mask.len() != h.len() {
        return Err(EncoderError::DimMismatch(format!(
            "mask is {0}x{0} but the sequence has {1} frames",
            mask.len(),
            h.len()
        )));
    }
    let mut x = h.data.clone();
    for layer in &w.layers {
        x = layer.forward(&x, mask, w.config.conv_mode);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(EncoderError::NumericalError);
    }
    Ok(HiddenSequence {
        data: x,
        frame_hop_s: h.frame_hop_s,
    })
}

/// Front-end plus conformer stack with the mask induced by `spec`.
pub fn encode(
    feats: &FeatureMatrix,
    spec: &ChunkSpec,
    w: &EncoderWeights,
) -> Result<HiddenSequence, EncoderError> {
    let h = conv_frontend(feats, w)?;
    let mask = build_attention_mask(h.len(), spec);
    conformer_forward(&h, &mask, w)
}
