mod args;
mod config;
mod model;
mod pipeline;

use std::fmt;
use std::io::Write;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use args::{Cli, Command};
use config::PipelineConfig;

/// Bad invocation detected after argument parsing (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Main output of a subcommand plus an optional failure verdict that is
/// reported after the output has been written.
pub struct Outcome {
    pub bytes: Vec<u8>,
    pub failure: Option<String>,
}

impl From<Vec<u8>> for Outcome {
    fn from(bytes: Vec<u8>) -> Self {
        Self { bytes, failure: None }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(verdict)) => {
            eprintln!("bestrq: {verdict}");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("bestrq: {err:#}");
            if err.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<Option<String>> {
    let cfg = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs as usize)
            .build_global()
            .context("starting worker pool")?;
    }

    let outcome: Outcome = match &cli.command {
        Command::Segment { wav_dir } => pipeline::segment(wav_dir, &cfg)?.into(),
        Command::Stats { manifest } => pipeline::stats(manifest)?.into(),
        Command::Dedup { manifest } => pipeline::dedup(manifest)?.into(),
        Command::Featurize {
            manifest,
            audio_dir,
            out_dir,
        } => pipeline::featurize(manifest, audio_dir, out_dir, &cfg)?.into(),
        Command::Codebook { in_dim } => pipeline::codebook(cli.seed, *in_dim, &cfg)?.into(),
        Command::Targets {
            manifest,
            features_dir,
            codebook,
        } => pipeline::targets(manifest, features_dir, codebook.as_deref(), cli.seed, &cfg)?.into(),
        Command::Maskplan { manifest, features_dir } => {
            pipeline::maskplan(manifest, features_dir, cli.seed, &cfg)?.into()
        }
        Command::Chunkspec { count } => model::chunkspec(cli.seed, *count)?.into(),
        Command::Encode {
            manifest,
            features_dir,
            preset,
            chunk,
        } => model::encode(manifest, features_dir, *preset, chunk, cli.seed)?.into(),
        Command::VerifyStreaming {
            trials,
            frames,
            chunk,
            centered,
        } => model::verify_streaming(*trials, *frames, chunk, *centered, cli.seed, &cfg)?,
        Command::CtcLoss { input } => model::ctc_loss(input)?.into(),
        Command::ScoreWer { reference, hyp } => model::score_wer(reference, hyp)?.into(),
    };

    match &cli.out {
        Some(path) => std::fs::write(path, &outcome.bytes)
            .with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&outcome.bytes)?;
            stdout.flush()?;
        }
    }
    Ok(outcome.failure)
}
