//! `coc correct`: threshold-gated correction sessions over a corpus.
//!
//! Produces a results directory containing `corrected.jsonl` (a corpus
//! whose "hyp" is the corrected text, references passed through),
//! `sessions.jsonl` (per-document decisions and transcript), `report.json`
//! (when references exist), optionally `record.jsonl` (a replayable
//! completion transcript), and exactly one `manifest.json`. With `--sweep`
//! the directory instead gets `sweep.csv`, one row per threshold.

use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use coc_core::{
    run_batch, BatchOptions, BatchOutcome, Document, EngineConfig, HttpClient, HttpClientConfig,
    IdentityMock, LlmClient, OracleMock, PinyinTable, RecordingClient, ReplayClient,
};

use super::{
    format_report_table, load_documents, resolve_pinyin_table, to_json_file, verify_additivity,
    CmdResult, GuidanceArg, EXIT_OK, EXIT_PARTIAL,
};
use crate::config::FileConfig;
use crate::manifest::RunManifest;

/// Environment variable consulted for the HTTP bearer token, overriding
/// the config file. Tokens never appear in flags or manifests.
pub const TOKEN_ENV_VAR: &str = "COC_API_TOKEN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MockArg {
    /// Echo the pre-recognized segment (no-op corrector).
    Identity,
    /// Return the reference segment (perfect corrector; requires refs).
    Oracle,
    /// Look up completions in a transcript recorded with --record.
    Replay,
}

#[derive(Debug, Args)]
pub struct CorrectArgs {
    /// Input corpus JSONL.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,

    /// Results directory (created if missing).
    #[arg(long, value_name = "DIR")]
    pub output_dir: PathBuf,

    /// Offline backend instead of an HTTP endpoint.
    #[arg(long, value_enum, conflicts_with = "endpoint")]
    pub mock: Option<MockArg>,

    /// Transcript JSONL for --mock replay.
    #[arg(long, value_name = "FILE", required_if_eq("mock", "replay"))]
    pub replay: Option<PathBuf>,

    /// Chat-completions endpoint URL (or [http].endpoint in the config).
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,

    /// Model name sent to the endpoint (or [http].model in the config).
    #[arg(long, value_name = "NAME")]
    pub model: Option<String>,

    /// Correction threshold: accept a correction iff its error rate against
    /// the pre-recognized segment does not exceed this.
    #[arg(long, value_name = "T")]
    pub threshold: Option<f64>,

    /// What the per-turn guidance quotes.
    #[arg(long, value_enum)]
    pub guidance: Option<GuidanceArg>,

    /// Extra queries allowed per segment after a rejected correction.
    #[arg(long, value_name = "N")]
    pub retries: Option<u32>,

    /// Worker threads for document-level parallelism (0 = automatic).
    #[arg(long, value_name = "N")]
    pub parallel: Option<usize>,

    /// Longest segment, in sentences.
    #[arg(long, value_name = "N")]
    pub max_sentences: Option<usize>,

    /// Base seed for the segment-length draws.
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,

    /// Sampling temperature for first attempts.
    #[arg(long, value_name = "T")]
    pub temperature: Option<f64>,

    /// Abort a session instead of warning when it exceeds the context
    /// budget.
    #[arg(long)]
    pub strict_context: bool,

    /// Record every completion to record.jsonl for later --mock replay.
    #[arg(long, conflicts_with = "sweep")]
    pub record: bool,

    /// Comma-separated thresholds: run each and write sweep.csv instead of
    /// correction outputs. Requires references.
    #[arg(long, value_name = "T1,T2,...")]
    pub sweep: Option<String>,

    /// TSV file overriding the built-in char → pinyin table.
    #[arg(long, value_name = "FILE")]
    pub pinyin_table: Option<PathBuf>,
}

pub fn run(args: CorrectArgs, config: &FileConfig) -> CmdResult {
    let docs = load_documents(&args.input)?;
    let table = resolve_pinyin_table(args.pinyin_table.as_deref())?;

    let mut engine = config.engine.clone();
    if let Some(threshold) = args.threshold {
        engine.threshold = threshold;
    }
    if let Some(guidance) = args.guidance {
        engine.guidance = guidance.into();
    }
    if let Some(retries) = args.retries {
        engine.max_retries = retries;
    }
    if let Some(temperature) = args.temperature {
        engine.temperature = temperature;
    }
    if args.strict_context {
        engine.strict_context = true;
    }
    engine
        .validate()
        .map_err(|e| anyhow::anyhow!(e.to_string()))?;

    let mut batch = config.batch.clone();
    if let Some(parallel) = args.parallel {
        batch.parallelism = parallel;
    }
    if let Some(max_sentences) = args.max_sentences {
        batch.max_sentences = max_sentences;
    }
    if let Some(seed) = args.seed {
        batch.seed = seed;
    }

    let (client_desc, client) = build_client(&args, config)?;

    fs::create_dir_all(&args.output_dir)
        .with_context(|| format!("cannot create {}", args.output_dir.display()))?;

    let mut manifest = RunManifest::new("correct");
    manifest.inputs = vec![args.input.display().to_string()];
    manifest.client = client_desc;
    manifest.engine = engine.clone();
    manifest.batch = batch.clone();

    if let Some(sweep) = &args.sweep {
        let thresholds = parse_sweep(sweep)?;
        return run_sweep(
            &docs,
            &*client,
            &engine,
            &batch,
            &table,
            &thresholds,
            &args.output_dir,
            manifest,
        );
    }

    let outcome = if args.record {
        let recorder = RecordingClient::new(client);
        let outcome = run_batch(&docs, &recorder, &engine, &batch, &table)
            .map_err(|e| anyhow::anyhow!(e.to_string()))?;
        let mut buf = Vec::new();
        recorder
            .write(&mut buf)
            .context("cannot serialize completion records")?;
        write_file(&args.output_dir, "record.jsonl", &buf)?;
        manifest.outputs.push("record.jsonl".to_string());
        outcome
    } else {
        run_batch(&docs, &*client, &engine, &batch, &table)
            .map_err(|e| anyhow::anyhow!(e.to_string()))?
    };

    // Corrected corpus in input order; failed documents are absent.
    let by_id: HashMap<&str, &str> = outcome
        .sessions
        .iter()
        .map(|s| (s.doc_id.as_str(), s.corrected_text.as_str()))
        .collect();
    let corrected: Vec<Document> = docs
        .iter()
        .filter_map(|doc| {
            by_id.get(doc.id.as_str()).map(|text| Document {
                id: doc.id.clone(),
                hyp_text: text.to_string(),
                ref_text: doc.ref_text.clone(),
                vad_segments: None,
            })
        })
        .collect();
    let mut buf = Vec::new();
    coc_core::write_corpus(&corrected, &mut buf).context("cannot serialize corrected corpus")?;
    write_file(&args.output_dir, "corrected.jsonl", &buf)?;
    manifest.outputs.push("corrected.jsonl".to_string());

    let mut buf = Vec::new();
    for session in &outcome.sessions {
        let line = serde_json::to_string(session).context("cannot serialize session")?;
        writeln!(buf, "{line}").expect("writing to a Vec cannot fail");
    }
    write_file(&args.output_dir, "sessions.jsonl", &buf)?;
    manifest.outputs.push("sessions.jsonl".to_string());

    if let Some(report) = &outcome.report {
        verify_additivity(report)?;
        write_file(
            &args.output_dir,
            "report.json",
            to_json_file(report)?.as_bytes(),
        )?;
        manifest.outputs.push("report.json".to_string());
    }

    manifest.failed_doc_ids = outcome
        .failures
        .iter()
        .filter_map(|f| f.doc_id().map(str::to_string))
        .collect();
    manifest
        .outputs
        .push(crate::manifest::MANIFEST_FILE.to_string());
    manifest.write(&args.output_dir)?;

    for failure in &outcome.failures {
        eprintln!("error: {failure}");
    }
    println!(
        "documents: {} corrected, {} failed",
        outcome.sessions.len(),
        outcome.failures.len()
    );
    println!("correction ratio: {:.4}", outcome.correction_ratio());
    if let Some(report) = &outcome.report {
        println!("{}", format_report_table(report));
    }

    Ok(if outcome.failures.is_empty() {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    })
}

/// Resolves the backend from flags, config, and environment. Exactly one of
/// `--mock` and an endpoint (flag or config) must be in play.
fn build_client(
    args: &CorrectArgs,
    config: &FileConfig,
) -> anyhow::Result<(String, Box<dyn LlmClient>)> {
    if let Some(mock) = args.mock {
        return Ok(match mock {
            MockArg::Identity => ("mock:identity".to_string(), Box::new(IdentityMock)),
            MockArg::Oracle => ("mock:oracle".to_string(), Box::new(OracleMock)),
            MockArg::Replay => {
                let path = args
                    .replay
                    .as_ref()
                    .expect("clap enforces --replay with --mock replay");
                let client = ReplayClient::load(path)
                    .with_context(|| format!("cannot load replay transcript {}", path.display()))?;
                (format!("replay:{}", path.display()), Box::new(client))
            }
        });
    }

    let endpoint = args
        .endpoint
        .clone()
        .or_else(|| (!config.http.endpoint.is_empty()).then(|| config.http.endpoint.clone()));
    let Some(endpoint) = endpoint else {
        anyhow::bail!(
            "no backend selected: pass --mock identity|oracle|replay, or an \
             HTTP endpoint via --endpoint/--model or the [http] config section"
        );
    };
    let model = args
        .model
        .clone()
        .or_else(|| (!config.http.model.is_empty()).then(|| config.http.model.clone()));
    let Some(model) = model else {
        anyhow::bail!("an HTTP endpoint needs a model name (--model or [http].model)");
    };
    let api_token = std::env::var(TOKEN_ENV_VAR)
        .ok()
        .or_else(|| config.http.api_token.clone());
    let http = HttpClientConfig {
        endpoint: endpoint.clone(),
        model: model.clone(),
        api_token,
        ..config.http.clone()
    };
    Ok((
        format!("http:{endpoint} model={model}"),
        Box::new(HttpClient::new(http)),
    ))
}

fn parse_sweep(spec: &str) -> anyhow::Result<Vec<f64>> {
    let thresholds: Vec<f64> = spec
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .with_context(|| format!("invalid sweep threshold {part:?}"))
        })
        .collect::<anyhow::Result<_>>()?;
    anyhow::ensure!(!thresholds.is_empty(), "empty sweep");
    anyhow::ensure!(
        thresholds.iter().all(|t| *t > 0.0),
        "sweep thresholds must be > 0"
    );
    Ok(thresholds)
}

/// Runs the batch once per threshold and writes one CSV row each, plus the
/// manifest. ERR needs references, so a ref-less corpus is a usage error.
#[allow(clippy::too_many_arguments)]
fn run_sweep(
    docs: &[Document],
    client: &dyn LlmClient,
    engine: &EngineConfig,
    batch: &BatchOptions,
    table: &PinyinTable,
    thresholds: &[f64],
    output_dir: &Path,
    mut manifest: RunManifest,
) -> CmdResult {
    let mut csv = String::from("threshold,er_mandarin,err_mandarin,correction_ratio\n");
    let mut any_failures = false;
    for &threshold in thresholds {
        let cfg = EngineConfig {
            threshold,
            ..engine.clone()
        };
        let outcome: BatchOutcome = run_batch(docs, client, &cfg, batch, table)
            .map_err(|e| anyhow::anyhow!(e.to_string()))?;
        for failure in &outcome.failures {
            eprintln!("error: [threshold {threshold}] {failure}");
        }
        any_failures |= !outcome.failures.is_empty();
        let report = outcome
            .report
            .as_ref()
            .context("sweep requires reference texts to compute ERR")?;
        verify_additivity(report)?;
        let err_cell = match report.mandarin.err {
            Some(err) => format!("{err:.6}"),
            None => String::new(),
        };
        csv.push_str(&format!(
            "{threshold},{:.6},{err_cell},{:.6}\n",
            report.mandarin.er,
            outcome.correction_ratio()
        ));
    }
    write_file(output_dir, "sweep.csv", csv.as_bytes())?;
    print!("{csv}");

    manifest.sweep_thresholds = thresholds.to_vec();
    manifest.outputs = vec![
        "sweep.csv".to_string(),
        crate::manifest::MANIFEST_FILE.to_string(),
    ];
    manifest.write(output_dir)?;
    Ok(if any_failures { EXIT_PARTIAL } else { EXIT_OK })
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))
}
