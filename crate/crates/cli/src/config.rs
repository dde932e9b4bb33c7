//! Layered configuration: an optional TOML file supplies defaults, and
//! command-line flags override individual fields on top of it.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use coc_core::{BatchOptions, EngineConfig, HttpClientConfig};
use serde::Deserialize;

/// On-disk configuration. Every section and field is optional and falls
/// back to the library defaults, so a config file only needs to spell out
/// what differs:
///
/// ```toml
/// [engine]
/// threshold = 0.4
/// guidance = "pinyin"
///
/// [batch]
/// parallelism = 8
///
/// [http]
/// endpoint = "https://localhost:8000/v1/chat/completions"
/// model = "my-corrector"
/// ```
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub engine: EngineConfig,
    pub batch: BatchOptions,
    pub http: HttpClientConfig,
}

/// Loads `path`, or the all-defaults config when no file was given.
pub fn load(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use coc_core::GuidanceMode;

    #[test]
    fn missing_file_argument_yields_defaults() {
        let cfg = load(None).unwrap();
        assert_eq!(cfg.engine, EngineConfig::default());
        assert_eq!(cfg.batch, BatchOptions::default());
        assert_eq!(cfg.http, HttpClientConfig::default());
    }

    #[test]
    fn partial_sections_fill_in_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("coc.toml");
        fs::write(
            &path,
            "[engine]\nthreshold = 0.4\nguidance = \"pinyin\"\n\n[batch]\nseed = 9\n",
        )
        .unwrap();
        let cfg = load(Some(&path)).unwrap();
        assert_eq!(cfg.engine.threshold, 0.4);
        assert_eq!(cfg.engine.guidance, GuidanceMode::Pinyin);
        assert_eq!(cfg.engine.max_retries, EngineConfig::default().max_retries);
        assert_eq!(cfg.batch.seed, 9);
        assert_eq!(cfg.batch.parallelism, 0);
    }

    #[test]
    fn unknown_top_level_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("coc.toml");
        fs::write(&path, "[engin]\nthreshold = 0.4\n").unwrap();
        assert!(load(Some(&path)).is_err());
    }
}
