//! `coc prepare`: reference corpus → multi-turn training chats.

use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use coc_core::{export_training_chats, CorpusError, PrepareOptions};

use super::{load_documents, resolve_pinyin_table, CmdResult, GuidanceArg, EXIT_OK, EXIT_PARTIAL};
use crate::config::FileConfig;

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Input corpus JSONL; every document must carry a "ref" text.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,

    /// Output JSONL of completed conversations, one per document.
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,

    /// Longest segment, in sentences.
    #[arg(long, value_name = "N")]
    pub max_sentences: Option<usize>,

    /// Base seed for the segment-length draws.
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,

    /// What the per-turn guidance quotes.
    #[arg(long, value_enum)]
    pub guidance: Option<GuidanceArg>,

    /// TSV file overriding the built-in char → pinyin table.
    #[arg(long, value_name = "FILE")]
    pub pinyin_table: Option<PathBuf>,

    /// File whose contents replace the built-in correction instruction.
    #[arg(long, value_name = "FILE")]
    pub instruction_file: Option<PathBuf>,
}

pub fn run(args: PrepareArgs, config: &FileConfig) -> CmdResult {
    let docs = load_documents(&args.input)?;
    let instruction = match &args.instruction_file {
        Some(path) => Some(
            fs::read_to_string(path)
                .with_context(|| format!("cannot read instruction file {}", path.display()))?
                .trim_end()
                .to_string(),
        ),
        None => config.engine.instruction.clone(),
    };
    let options = PrepareOptions {
        max_sentences: args.max_sentences.unwrap_or(config.batch.max_sentences),
        seed: args.seed.unwrap_or(config.batch.seed),
        guidance: args
            .guidance
            .map(Into::into)
            .unwrap_or(config.engine.guidance),
        instruction,
    };
    let table = resolve_pinyin_table(args.pinyin_table.as_deref())?;

    // Buffer the whole export so a mid-corpus failure never leaves a
    // truncated output file behind.
    let mut buf = Vec::new();
    match export_training_chats(&docs, &options, &table, &mut buf) {
        Ok(count) => {
            fs::write(&args.output, &buf)
                .with_context(|| format!("cannot write {}", args.output.display()))?;
            log::info!("wrote {count} conversations to {}", args.output.display());
            Ok(EXIT_OK)
        }
        Err(CorpusError::Io(source)) => Err(anyhow::Error::new(source).context("export failed")),
        Err(error) => {
            // Document-level problem (missing or empty reference, chat
            // validation): report it and signal a partial failure.
            eprintln!("error: {error}");
            Ok(EXIT_PARTIAL)
        }
    }
}
