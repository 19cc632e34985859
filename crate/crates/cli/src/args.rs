use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "bestrq", version, about = "Seeded speech pretraining data pipeline and target machinery")]
pub struct Cli {
    /// Root seed; every random draw is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for per-file and per-utterance work.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,

    /// JSON file with optional `vad`, `segmentation`, `features`,
    /// `quantizer`, `masking` and `encoder` sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Write the main output here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect speech in every WAV file of a directory and write a manifest.
    Segment {
        wav_dir: PathBuf,
    },
    /// Duration statistics of a manifest as JSON.
    Stats {
        manifest: PathBuf,
    },
    /// Drop records whose audio hash was already seen.
    Dedup {
        manifest: PathBuf,
    },
    /// Compute log-mel features for every manifest record.
    Featurize {
        manifest: PathBuf,
        /// Directory holding `<source_id>.wav`.
        #[arg(long)]
        audio_dir: PathBuf,
        /// Directory that receives `<id>.brqf`.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write a freshly initialised codebook file.
    Codebook {
        /// Projection input width; defaults to mel bins times the stack factor.
        #[arg(long)]
        in_dim: Option<usize>,
    },
    /// Quantize stacked features into target ids.
    Targets {
        manifest: PathBuf,
        #[arg(long)]
        features_dir: PathBuf,
        /// Codebook file; generated from the seed when absent.
        #[arg(long)]
        codebook: Option<PathBuf>,
    },
    /// Sample one span-mask plan per record.
    Maskplan {
        manifest: PathBuf,
        #[arg(long)]
        features_dir: PathBuf,
    },
    /// Sample per-batch attention chunk specs.
    Chunkspec {
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Run the seeded encoder and report output shapes and checksums.
    Encode {
        manifest: PathBuf,
        #[arg(long)]
        features_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Preset::Test)]
        preset: Preset,
        #[command(flatten)]
        chunk: ChunkArgs,
    },
    /// Perturbation test of streaming locality on random inputs.
    VerifyStreaming {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Encoder frames per trial.
        #[arg(long, default_value_t = 64)]
        frames: usize,
        #[command(flatten)]
        chunk: ChunkArgs,
        /// Use a centred convolution, which looks ahead and must fail.
        #[arg(long)]
        centered: bool,
    },
    /// CTC loss and greedy decode for JSON-lines `{log_probs, target}`.
    CtcLoss {
        input: PathBuf,
    },
    /// Corpus word error rate of line-aligned text files.
    ScoreWer {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        hyp: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Test,
    Base,
    Large,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct ChunkArgs {
    /// Chunk width in encoder frames; full context when absent.
    #[arg(long)]
    pub chunk: Option<usize>,
    /// Left-context chunks; unlimited when absent.
    #[arg(long, requires = "chunk")]
    pub left: Option<usize>,
}
