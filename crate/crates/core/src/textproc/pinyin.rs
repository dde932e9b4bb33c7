//! Character-level pinyin transliteration.
//!
//! Backed by a plain-text table mapping one CJK ideograph to one
//! tone-numbered syllable. Polyphones carry their single most common
//! reading; this is guidance for a correction model, not a full
//! grapheme-to-phoneme system.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use super::is_cjk;

const BUILTIN_TABLE: &str = include_str!("../../data/pinyin.tsv");

/// Error parsing or loading a pinyin table file.
#[derive(Debug)]
pub enum PinyinTableError {
    Io(std::io::Error),
    /// A non-comment line that is not `<char><TAB><syllable>`.
    Malformed {
        line: usize,
        content: String,
    },
}

impl fmt::Display for PinyinTableError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PinyinTableError::Io(e) => write!(f, "failed to read pinyin table: {e}"),
            PinyinTableError::Malformed { line, content } => {
                write!(f, "malformed pinyin table line {line}: {content:?}")
            }
        }
    }
}

impl std::error::Error for PinyinTableError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            PinyinTableError::Io(e) => Some(e),
            PinyinTableError::Malformed { .. } => None,
        }
    }
}

impl From<std::io::Error> for PinyinTableError {
    fn from(e: std::io::Error) -> Self {
        PinyinTableError::Io(e)
    }
}

/// Lookup table from CJK ideograph to tone-numbered syllable (e.g. `ni3`).
#[derive(Debug, Clone, Default)]
pub struct PinyinTable {
    readings: HashMap<char, String>,
}

impl PinyinTable {
    /// Parse table text: one `<char><TAB><syllable>` per line, `#` comments
    /// and blank lines ignored. On duplicate characters the first entry wins.
    pub fn parse(text: &str) -> Result<Self, PinyinTableError> {
        let mut readings = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parsed = line.split_once('\t').and_then(|(ch, syllable)| {
                let mut chars = ch.chars();
                let c = chars.next()?;
                if chars.next().is_some() || syllable.trim().is_empty() {
                    return None;
                }
                Some((c, syllable.trim().to_string()))
            });
            match parsed {
                Some((c, syllable)) => {
                    readings.entry(c).or_insert(syllable);
                }
                None => {
                    return Err(PinyinTableError::Malformed {
                        line: idx + 1,
                        content: raw.to_string(),
                    })
                }
            }
        }
        Ok(PinyinTable { readings })
    }

    /// Load a table from a file on disk.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PinyinTableError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// The table compiled into the library, covering the CJK unified block
    /// and Extension A.
    pub fn builtin() -> &'static PinyinTable {
        static TABLE: OnceLock<PinyinTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            PinyinTable::parse(BUILTIN_TABLE).expect("builtin pinyin table must parse")
        })
    }

    pub fn lookup(&self, ch: char) -> Option<&str> {
        self.readings.get(&ch).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }
}

/// Transliterate text to space-separated pinyin.
///
/// Each CJK ideograph becomes one syllable piece; each maximal run of
/// non-CJK, non-whitespace characters is kept verbatim as one piece;
/// whitespace only separates pieces. The result joins all pieces with single
/// spaces, so `"你好。"` becomes `"ni3 hao3 。"`. Ideographs missing from the
/// table pass through unchanged.
pub fn to_pinyin(text: &str, table: &PinyinTable) -> String {
    let mut pieces: Vec<String> = Vec::new();
    let mut run = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !run.is_empty() {
                pieces.push(std::mem::take(&mut run));
            }
        } else if is_cjk(ch) {
            if !run.is_empty() {
                pieces.push(std::mem::take(&mut run));
            }
            match table.lookup(ch) {
                Some(syllable) => pieces.push(syllable.to_string()),
                None => pieces.push(ch.to_string()),
            }
        } else {
            run.push(ch);
        }
    }
    if !run.is_empty() {
        pieces.push(run);
    }
    pieces.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_covers_common_characters() {
        let t = PinyinTable::builtin();
        assert_eq!(t.lookup('你'), Some("ni3"));
        assert_eq!(t.lookup('好'), Some("hao3"));
        assert_eq!(t.lookup('模'), Some("mo2"));
        assert_eq!(t.lookup('型'), Some("xing2"));
        assert!(t.len() > 20_000);
    }

    #[test]
    fn simple_sentence() {
        assert_eq!(to_pinyin("你好。", PinyinTable::builtin()), "ni3 hao3 。");
    }

    #[test]
    fn mixed_script_keeps_non_cjk_runs_verbatim() {
        assert_eq!(
            to_pinyin("GPT模型2024", PinyinTable::builtin()),
            "GPT mo2 xing2 2024"
        );
    }

    #[test]
    fn whitespace_separates_without_surviving() {
        assert_eq!(to_pinyin("ok  好 ok", PinyinTable::builtin()), "ok hao3 ok");
    }

    #[test]
    fn missing_character_passes_through() {
        let table = PinyinTable::parse("好\thao3\n").unwrap();
        assert_eq!(to_pinyin("你好", &table), "你 hao3");
    }

    #[test]
    fn empty_input_empty_output() {
        assert_eq!(to_pinyin("", PinyinTable::builtin()), "");
    }

    #[test]
    fn parses_comments_and_blank_lines() {
        let table = PinyinTable::parse("# comment\n\n你\tni3\n").unwrap();
        assert_eq!(table.lookup('你'), Some("ni3"));
        assert_eq!(table.len(), 1);
    }

    #[test]
    fn duplicate_entries_keep_first() {
        let table = PinyinTable::parse("行\txing2\n行\thang2\n").unwrap();
        assert_eq!(table.lookup('行'), Some("xing2"));
    }

    #[test]
    fn malformed_line_is_rejected_with_line_number() {
        let err = PinyinTable::parse("你\tni3\nbogus line\n").unwrap_err();
        match err {
            PinyinTableError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("expected Malformed, got {other:?}"),
        }
    }

    #[test]
    fn load_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.tsv");
        std::fs::write(&path, "你\tni3\n").unwrap();
        let table = PinyinTable::load(&path).unwrap();
        assert_eq!(table.lookup('你'), Some("ni3"));
    }
}
