//! `coc evaluate`: decomposed error-rate report against references.
//!
//! Scores either a corrected corpus (`--corrected`, matched to the
//! reference corpus by document id, with ERR against the raw hypotheses) or
//! the reference corpus's own hypotheses (the recognition baseline).

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use coc_core::{Document, ReportAccumulator};

use super::{
    format_report_table, load_documents, to_json_file, verify_additivity, CmdResult, EXIT_OK,
    EXIT_PARTIAL,
};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Corpus JSONL carrying the references (and baseline hypotheses).
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,

    /// Corrected corpus JSONL whose "hyp" texts are scored; omitted →
    /// score the reference corpus's own hypotheses.
    #[arg(long, value_name = "FILE")]
    pub corrected: Option<PathBuf>,

    /// Also write the metric report as JSON.
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

pub fn run(args: EvaluateArgs) -> CmdResult {
    let docs = load_documents(&args.corpus)?;
    let corrected = args.corrected.as_deref().map(load_documents).transpose()?;
    let corrected_by_id: Option<HashMap<&str, &Document>> = corrected
        .as_ref()
        .map(|docs| docs.iter().map(|d| (d.id.as_str(), d)).collect());

    let mut scored = ReportAccumulator::new();
    let mut baseline = ReportAccumulator::new();
    let mut evaluated = 0usize;
    let mut without_ref = 0usize;
    let mut missing: Vec<&str> = Vec::new();
    for doc in &docs {
        let Some(ref_text) = &doc.ref_text else {
            without_ref += 1;
            continue;
        };
        let hyp = match &corrected_by_id {
            Some(index) => match index.get(doc.id.as_str()) {
                Some(corrected_doc) => corrected_doc.hyp_text.as_str(),
                None => {
                    missing.push(&doc.id);
                    continue;
                }
            },
            None => doc.hyp_text.as_str(),
        };
        scored.add_pair(ref_text, hyp);
        baseline.add_pair(ref_text, &doc.hyp_text);
        evaluated += 1;
    }
    anyhow::ensure!(
        evaluated > 0,
        "no evaluable documents: references are required{}",
        if missing.is_empty() {
            ""
        } else {
            " (and every corrected id was missing)"
        }
    );

    // ERR only makes sense when a corrected corpus is compared against the
    // baseline hypotheses; a bare baseline evaluation reports plain ER.
    let report = if corrected_by_id.is_some() {
        scored.finalize().with_baseline(&baseline.finalize())
    } else {
        scored.finalize()
    };
    verify_additivity(&report)?;

    if without_ref > 0 {
        log::warn!("skipped {without_ref} documents without references");
    }
    for id in &missing {
        eprintln!("error: document {id} is missing from the corrected corpus");
    }

    println!("documents evaluated: {evaluated}");
    println!("{}", format_report_table(&report));
    if let Some(path) = &args.json {
        fs::write(path, to_json_file(&report)?)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }

    Ok(if missing.is_empty() {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    })
}
