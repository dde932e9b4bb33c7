//! `coc simulate`: clean text → synthetic hypothesis corpus.

use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use coc_core::{simulate_corpus, write_corpus, NoiseProfile};

use super::{load_documents, CmdResult, EXIT_OK};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Clean-text corpus JSONL. The "ref" field is corrupted when present,
    /// otherwise "hyp" is treated as the clean text.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,

    /// Output corpus JSONL; "hyp" carries the corrupted text, "ref" the
    /// clean original.
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,

    /// Noise profile TOML (per-token corruption rates). Omitted → identity
    /// profile, which copies the clean text through unchanged.
    #[arg(long, value_name = "FILE")]
    pub profile: Option<PathBuf>,

    /// Overrides the profile's base seed.
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
}

pub fn run(args: SimulateArgs) -> CmdResult {
    let docs = load_documents(&args.input)?;

    let mut profile = match &args.profile {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read noise profile {}", path.display()))?;
            toml::from_str::<NoiseProfile>(&text)
                .with_context(|| format!("invalid noise profile {}", path.display()))?
        }
        None => NoiseProfile::default(),
    };
    if let Some(seed) = args.seed {
        profile.seed = seed;
    }
    anyhow::ensure!(profile.is_valid(), "noise profile rates must lie in [0, 1]");

    let noisy = simulate_corpus(&docs, &profile);
    let mut buf = Vec::new();
    write_corpus(&noisy, &mut buf).context("cannot serialize corpus")?;
    fs::write(&args.output, &buf)
        .with_context(|| format!("cannot write {}", args.output.display()))?;
    log::info!(
        "wrote {} documents to {}",
        noisy.len(),
        args.output.display()
    );
    Ok(EXIT_OK)
}
