//! `coc`: batch tooling around the correction engine.
//!
//! Four subcommands cover the full workflow:
//!
//! * `prepare`  — reference corpus → multi-turn training chats (JSONL)
//! * `simulate` — clean text → synthetic hypothesis corpus under a noise
//!   profile
//! * `correct`  — threshold-gated correction sessions against a backend
//!   (HTTP endpoint, offline mock, or replay transcript)
//! * `evaluate` — decomposed error-rate report for corrected output (or raw
//!   hypotheses) against references
//!
//! Settings come from an optional TOML config file (`--config`), overridden
//! field-by-field with command-line flags. Exit codes: 0 on success, 1 when
//! some documents failed but the run produced output, 2 on configuration or
//! usage errors.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "coc",
    version,
    about = "Segment-chained correction of full-text ASR transcripts",
    propagate_version = true
)]
struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Export multi-turn training conversations from a reference corpus.
    Prepare(commands::prepare::PrepareArgs),
    /// Corrupt clean text into a synthetic hypothesis corpus.
    Simulate(commands::simulate::SimulateArgs),
    /// Run threshold-gated correction sessions over a corpus.
    Correct(commands::correct::CorrectArgs),
    /// Score corrected output (or raw hypotheses) against references.
    Evaluate(commands::evaluate::EvaluateArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    let cli = Cli::parse();
    let file_config = match config::load(cli.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(error) => {
            eprintln!("error: {error:#}");
            return ExitCode::from(2);
        }
    };

    let result = match cli.command {
        Command::Prepare(args) => commands::prepare::run(args, &file_config),
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Correct(args) => commands::correct::run(args, &file_config),
        Command::Evaluate(args) => commands::evaluate::run(args),
    };

    match result {
        Ok(code) => ExitCode::from(code),
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::from(2)
        }
    }
}
