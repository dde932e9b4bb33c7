//! Run manifests: a self-describing record written into every results
//! directory so a run can be audited or reproduced later.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use chrono::{DateTime, Utc};
use coc_core::{BatchOptions, EngineConfig};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to rerun a `correct` invocation: the effective engine
/// and batch configuration (after config-file/flag merging), the input
/// corpus, and a client descriptor — plus provenance (tool version,
/// creation time) and the outcome summary. Auth tokens are deliberately
/// never recorded. With a deterministic client (mock or replay), re-running
/// the same settings reproduces the outputs byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub created_at: DateTime<Utc>,
    pub inputs: Vec<String>,
    /// Human-readable backend descriptor, e.g. `mock:identity`,
    /// `replay:records.jsonl`, or `http:<endpoint> model=<model>`.
    pub client: String,
    pub engine: EngineConfig,
    pub batch: BatchOptions,
    /// Thresholds of a sweep run; empty for a plain run (which uses
    /// `engine.threshold`).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep_thresholds: Vec<f64>,
    /// Files produced in the output directory, relative to it.
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed_doc_ids: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_at: Utc::now(),
            inputs: Vec::new(),
            client: String::new(),
            engine: EngineConfig::default(),
            batch: BatchOptions::default(),
            sweep_thresholds: Vec::new(),
            outputs: Vec::new(),
            failed_doc_ids: Vec::new(),
        }
    }

    /// Writes `manifest.json` into `dir`, replacing any stale manifest from
    /// a previous run so the directory always holds exactly one.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).context("cannot serialize manifest")?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
    }
}
