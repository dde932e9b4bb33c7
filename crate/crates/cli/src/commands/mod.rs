//! Subcommand implementations and the plumbing they share.

pub mod correct;
pub mod evaluate;
pub mod prepare;
pub mod simulate;

use std::borrow::Cow;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use coc_core::{load_corpus, Document, GuidanceMode, MetricReport, PinyinTable};

/// Commands return their exit code; the `Err` path is reserved for
/// configuration and usage errors, which exit with 2.
pub type CmdResult = Result<u8>;

pub(crate) const EXIT_OK: u8 = 0;
pub(crate) const EXIT_PARTIAL: u8 = 1;

/// Command-line face of [`GuidanceMode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GuidanceArg {
    /// Quote the pre-recognized segment verbatim.
    Hyp,
    /// Replace it with numbered-pinyin syllables.
    Pinyin,
}

impl From<GuidanceArg> for GuidanceMode {
    fn from(arg: GuidanceArg) -> Self {
        match arg {
            GuidanceArg::Hyp => GuidanceMode::Hyp,
            GuidanceArg::Pinyin => GuidanceMode::Pinyin,
        }
    }
}

pub(crate) fn load_documents(path: &Path) -> Result<Vec<Document>> {
    load_corpus(path).with_context(|| format!("cannot load corpus {}", path.display()))
}

/// Loads a user-supplied pinyin table, or borrows the built-in one.
pub(crate) fn resolve_pinyin_table(path: Option<&Path>) -> Result<Cow<'static, PinyinTable>> {
    match path {
        Some(p) => PinyinTable::load(p)
            .map(Cow::Owned)
            .with_context(|| format!("cannot load pinyin table {}", p.display())),
        None => Ok(Cow::Borrowed(PinyinTable::builtin())),
    }
}

/// Renders a report for eyeballing: ER as a percentage with two decimals,
/// ERR signed, `-` where no baseline was available, plus the reference
/// token count behind each row.
pub(crate) fn format_report_table(report: &MetricReport) -> String {
    let rows = [
        ("Mandarin", &report.mandarin),
        ("Punctuation", &report.punctuation),
        ("ITN", &report.itn),
        ("CS-English", &report.cs_english),
        ("Overall", &report.overall),
    ];
    let mut out = format!("{:<12} {:>9} {:>9} {:>9}\n", "Category", "ER%", "ERR%", "N");
    for (name, metrics) in rows {
        let er = if metrics.er.is_finite() {
            format!("{:.2}", metrics.er * 100.0)
        } else {
            "inf".to_string()
        };
        let err = match metrics.err {
            Some(e) if e.is_finite() => format!("{:+.2}", e * 100.0),
            Some(_) => "inf".to_string(),
            None => "-".to_string(),
        };
        out.push_str(&format!(
            "{name:<12} {er:>9} {err:>9} {:>9}\n",
            metrics.n_ref
        ));
    }
    out
}

/// Cross-checks the category-decomposition invariant: per-category token
/// and edit counts must add up to the overall row. A violation is an
/// internal bug, never a user error.
pub(crate) fn verify_additivity(report: &MetricReport) -> Result<()> {
    let parts = [
        &report.mandarin,
        &report.punctuation,
        &report.itn,
        &report.cs_english,
    ];
    let sums = parts.iter().fold((0, 0, 0, 0), |acc, c| {
        (acc.0 + c.n_ref, acc.1 + c.s, acc.2 + c.d, acc.3 + c.i)
    });
    let overall = &report.overall;
    anyhow::ensure!(
        sums == (overall.n_ref, overall.s, overall.d, overall.i),
        "internal error: category counts do not add up to the overall counts"
    );
    Ok(())
}

/// Serializes a value as pretty JSON with a trailing newline.
pub(crate) fn to_json_file(value: &impl serde::Serialize) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value).context("cannot serialize output")?;
    text.push('\n');
    Ok(text)
}
