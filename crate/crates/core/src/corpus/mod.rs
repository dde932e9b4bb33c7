//! Corpus ingestion, alignment-based segmentation, synthetic error
//! injection, and chat-format training export.
//!
//! Corpora are JSONL: one `{"id", "hyp", "ref"?, "segments"?}` object per
//! line. The optional `segments` array carries pre-segmented hypotheses for
//! material whose segmentation came from voice activity detection upstream;
//! everything else is segmented here by sentence grouping.

mod noise;
pub mod synth;

pub use noise::{inject_noise, inject_noise_detailed, NoiseOutcome, NoiseProfile};

use std::collections::HashSet;
use std::io::{self, BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{align, project_boundary};
use crate::chat::{build_conversation, ChatError, GuidanceMode, DEFAULT_INSTRUCTION};
use crate::textproc::{split_sentences, tokenize, PinyinTable};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read corpus: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: malformed corpus record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate document id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("document {id:?} has an empty hypothesis text")]
    EmptyHyp { id: String },
    #[error("document {id:?}: pre-segmented texts do not concatenate to the hypothesis")]
    VadMismatch { id: String },
    #[error("max_sentences must be at least 1")]
    InvalidMaxSentences,
    #[error("document {id:?} has no reference text")]
    MissingRef { id: String },
    #[error("document {id:?}: segment {index} projects to an empty reference segment")]
    EmptyRefSegment { id: String, index: usize },
    #[error("document {id:?}: {source}")]
    Chat {
        id: String,
        #[source]
        source: ChatError,
    },
    #[error("document {id:?}: failed to serialize chat: {source}")]
    Serialize {
        id: String,
        #[source]
        source: serde_json::Error,
    },
}

/// One corpus entry: an ASR hypothesis plus, for training and evaluation,
/// its ground-truth reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "WireDocument", into = "WireDocument")]
pub struct Document {
    pub id: String,
    /// ASR output; never empty.
    pub hyp_text: String,
    /// Ground truth; absent for pure inference input.
    pub ref_text: Option<String>,
    /// Pre-segmented hypothesis (e.g. VAD-delimited chunks of very long
    /// recordings). When present, segmentation uses these instead of
    /// sentence grouping; their concatenation equals `hyp_text`.
    pub vad_segments: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct WireDocument {
    id: String,
    hyp: String,
    #[serde(rename = "ref", default, skip_serializing_if = "Option::is_none")]
    reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segments: Option<Vec<String>>,
}

impl From<Document> for WireDocument {
    fn from(d: Document) -> Self {
        WireDocument {
            id: d.id,
            hyp: d.hyp_text,
            reference: d.ref_text,
            segments: d.vad_segments,
        }
    }
}

impl TryFrom<WireDocument> for Document {
    type Error = String;

    fn try_from(w: WireDocument) -> Result<Self, String> {
        if w.hyp.is_empty() {
            return Err(format!(
                "document {:?}: field \"hyp\" must be non-empty",
                w.id
            ));
        }
        if let Some(segments) = &w.segments {
            let concat: String = segments.concat();
            if concat != w.hyp {
                return Err(format!(
                    "document {:?}: \"segments\" do not concatenate to \"hyp\"",
                    w.id
                ));
            }
        }
        Ok(Document {
            id: w.id,
            hyp_text: w.hyp,
            ref_text: w.reference,
            vad_segments: w.segments,
        })
    }
}

impl Document {
    pub fn new(id: impl Into<String>, hyp_text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            hyp_text: hyp_text.into(),
            ref_text: None,
            vad_segments: None,
        }
    }

    pub fn with_ref(mut self, ref_text: impl Into<String>) -> Self {
        self.ref_text = Some(ref_text.into());
        self
    }
}

/// A hypothesis segment paired with its alignment-projected reference span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentPair {
    pub index: usize,
    pub hyp_segment: String,
    pub ref_segment: Option<String>,
    /// Number of sentences grouped into this segment; stays within the
    /// segmentizer's 1–5 range except for pre-segmented input, which keeps
    /// its upstream chunking.
    pub sentence_count: usize,
}

/// Mix a corpus-level seed with a document id into a per-document seed
/// (FNV-1a over the seed bytes then the id bytes), so per-document streams
/// do not depend on corpus order.
pub fn derive_seed(seed: u64, doc_id: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    for byte in seed.to_le_bytes() {
        hash = (hash ^ u64::from(byte)).wrapping_mul(PRIME);
    }
    for &byte in doc_id.as_bytes() {
        hash = (hash ^ u64::from(byte)).wrapping_mul(PRIME);
    }
    hash
}

/// Parse a JSONL corpus from a reader. Blank lines are skipped; errors carry
/// 1-based line numbers; duplicate ids are rejected.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(doc.id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: idx + 1,
                id: doc.id,
            });
        }
        docs.push(doc);
    }
    Ok(docs)
}

/// Load a JSONL corpus from disk. See [`read_corpus`].
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>, CorpusError> {
    let file = std::fs::File::open(path)?;
    read_corpus(io::BufReader::new(file))
}

/// Write documents as corpus JSONL, one object per line.
pub fn write_corpus<'a, W: Write>(
    docs: impl IntoIterator<Item = &'a Document>,
    out: &mut W,
) -> Result<(), CorpusError> {
    for doc in docs {
        let line = serde_json::to_string(doc).map_err(|e| CorpusError::Serialize {
            id: doc.id.clone(),
            source: e,
        })?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Map each char index of `text` to its byte offset (plus the end offset),
/// for slicing by character positions.
fn char_byte_offsets(text: &str) -> Vec<usize> {
    let mut offsets: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
    offsets.push(text.len());
    offsets
}

/// Split a document into segments of grouped sentences and project the
/// reference text onto the same cut points.
///
/// Sentence runs of length k are drawn uniformly from `[1, max_sentences]`
/// with a ChaCha stream seeded from `(seed, doc.id)`, so the split is
/// deterministic and independent of corpus order. Reference boundaries come
/// from a token-level alignment: each hypothesis cut is mapped through
/// [`project_boundary`] and back to a character offset. Pre-segmented
/// documents keep their given chunks and only get the reference projection.
///
/// Both concatenation invariants hold: hyp segments rebuild `hyp_text` and
/// ref segments rebuild `ref_text`.
pub fn segmentize(
    doc: &Document,
    max_sentences: usize,
    seed: u64,
) -> Result<Vec<SegmentPair>, CorpusError> {
    if max_sentences < 1 {
        return Err(CorpusError::InvalidMaxSentences);
    }
    if doc.hyp_text.is_empty() {
        return Err(CorpusError::EmptyHyp { id: doc.id.clone() });
    }

    // Hypothesis cut points in characters, plus per-segment sentence counts.
    let hyp_char_len = doc.hyp_text.chars().count();
    let mut cuts: Vec<usize> = vec![0];
    let mut sentence_counts: Vec<usize> = Vec::new();
    if let Some(vad) = &doc.vad_segments {
        let concat: String = vad.concat();
        if concat != doc.hyp_text {
            return Err(CorpusError::VadMismatch { id: doc.id.clone() });
        }
        for segment in vad {
            let last = *cuts.last().unwrap();
            cuts.push(last + segment.chars().count());
            sentence_counts.push(split_sentences(segment).len().max(1));
        }
    } else {
        let sentences = split_sentences(&doc.hyp_text);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &doc.id));
        let mut next = 0;
        while next < sentences.len() {
            let k = rng
                .random_range(1..=max_sentences)
                .min(sentences.len() - next);
            let group = &sentences[next..next + k];
            let chars: usize = group.iter().map(|s| s.text.chars().count()).sum();
            let last = *cuts.last().unwrap();
            cuts.push(last + chars);
            sentence_counts.push(k);
            next += k;
        }
    }
    debug_assert_eq!(*cuts.last().unwrap(), hyp_char_len);

    // Reference cut points via alignment projection.
    let ref_cuts: Option<(Vec<usize>, Vec<usize>)> = doc.ref_text.as_deref().map(|ref_text| {
        let hyp_tokens = tokenize(&doc.hyp_text);
        let ref_tokens = tokenize(ref_text);
        let alignment = align(&ref_tokens, &hyp_tokens);
        let ref_byte = char_byte_offsets(ref_text);
        let ref_char_len = ref_byte.len() - 1;
        let cuts = cuts
            .iter()
            .map(|&c| {
                if c == 0 {
                    return 0;
                }
                if c == hyp_char_len {
                    return ref_char_len;
                }
                let hyp_boundary = hyp_tokens.partition_point(|t| t.char_offset < c);
                let ref_boundary = project_boundary(&alignment, hyp_boundary);
                if ref_boundary == ref_tokens.len() {
                    ref_char_len
                } else {
                    ref_tokens[ref_boundary].char_offset
                }
            })
            .collect();
        (cuts, ref_byte)
    });

    let hyp_byte = char_byte_offsets(&doc.hyp_text);
    let mut pairs = Vec::with_capacity(sentence_counts.len());
    for (index, window) in cuts.windows(2).enumerate() {
        let hyp_segment = doc.hyp_text[hyp_byte[window[0]]..hyp_byte[window[1]]].to_string();
        let ref_segment = ref_cuts.as_ref().map(|(rc, rb)| {
            let ref_text = doc.ref_text.as_deref().unwrap();
            ref_text[rb[rc[index]]..rb[rc[index + 1]]].to_string()
        });
        pairs.push(SegmentPair {
            index,
            hyp_segment,
            ref_segment,
            sentence_count: sentence_counts[index],
        });
    }
    Ok(pairs)
}

/// Replace every reference-bearing document's hypothesis with a noisy copy
/// of its clean text, seeding the noise stream per document.
///
/// Documents without a reference are treated as clean text riding in
/// `hyp_text`; the output always carries the clean text as `ref_text` and
/// the corrupted text as `hyp_text`.
pub fn simulate_corpus(docs: &[Document], profile: &NoiseProfile) -> Vec<Document> {
    docs.iter()
        .map(|doc| {
            let clean = doc.ref_text.as_deref().unwrap_or(&doc.hyp_text);
            let per_doc = NoiseProfile {
                seed: derive_seed(profile.seed, &doc.id),
                ..profile.clone()
            };
            Document {
                id: doc.id.clone(),
                hyp_text: inject_noise(clean, &per_doc),
                ref_text: Some(clean.to_string()),
                vad_segments: None,
            }
        })
        .collect()
}

/// Options for training-chat export.
#[derive(Debug, Clone, PartialEq)]
pub struct PrepareOptions {
    pub max_sentences: usize,
    pub seed: u64,
    pub guidance: GuidanceMode,
    /// Overrides [`DEFAULT_INSTRUCTION`] when set.
    pub instruction: Option<String>,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        PrepareOptions {
            max_sentences: 5,
            seed: 0,
            guidance: GuidanceMode::Hyp,
            instruction: None,
        }
    }
}

/// Export one completed training conversation per document as JSONL:
/// user turns carry the segment guidance (first turn also instruction and
/// full-text context), assistant turns carry the reference segments.
/// Returns the number of documents written.
pub fn export_training_chats<W: Write>(
    docs: &[Document],
    options: &PrepareOptions,
    table: &PinyinTable,
    out: &mut W,
) -> Result<usize, CorpusError> {
    let instruction = options
        .instruction
        .as_deref()
        .unwrap_or(DEFAULT_INSTRUCTION);
    let mut written = 0;
    for doc in docs {
        if doc.ref_text.is_none() {
            return Err(CorpusError::MissingRef { id: doc.id.clone() });
        }
        let segments = segmentize(doc, options.max_sentences, options.seed)?;
        let mut replies = Vec::with_capacity(segments.len());
        for segment in &segments {
            match segment.ref_segment.as_deref() {
                Some(text) if !text.is_empty() => replies.push(text),
                _ => {
                    return Err(CorpusError::EmptyRefSegment {
                        id: doc.id.clone(),
                        index: segment.index,
                    })
                }
            }
        }
        let conversation = build_conversation(
            &doc.hyp_text,
            &segments,
            options.guidance,
            instruction,
            table,
        )
        .and_then(|plan| plan.complete(&replies))
        .map_err(|source| CorpusError::Chat {
            id: doc.id.clone(),
            source,
        })?;
        let line =
            serde_json::to_string(&conversation).map_err(|source| CorpusError::Serialize {
                id: doc.id.clone(),
                source,
            })?;
        writeln!(out, "{line}")?;
        written += 1;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chat::Conversation;
    use proptest::prelude::*;

    #[test]
    fn read_empty_corpus() {
        assert!(read_corpus(io::Cursor::new("")).unwrap().is_empty());
        assert!(read_corpus(io::Cursor::new("\n\n")).unwrap().is_empty());
    }

    #[test]
    fn read_two_documents() {
        let data = concat!(
            r#"{"id":"a","hyp":"你好。","ref":"你好。"}"#,
            "\n",
            r#"{"id":"b","hyp":"再见。"}"#,
            "\n",
        );
        let docs = read_corpus(io::Cursor::new(data)).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].id, "a");
        assert_eq!(docs[0].ref_text.as_deref(), Some("你好。"));
        assert_eq!(docs[1].ref_text, None);
    }

    #[test]
    fn read_rejects_missing_hyp_with_line_number() {
        let data = concat!(
            r#"{"id":"a","hyp":"好。"}"#,
            "\n",
            r#"{"id":"b","ref":"好。"}"#,
            "\n",
        );
        match read_corpus(io::Cursor::new(data)).unwrap_err() {
            CorpusError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("expected Malformed, got {other}"),
        }
    }

    #[test]
    fn read_rejects_empty_hyp() {
        let data = r#"{"id":"a","hyp":""}"#;
        assert!(matches!(
            read_corpus(io::Cursor::new(data)),
            Err(CorpusError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn read_rejects_duplicate_id() {
        let data = concat!(
            r#"{"id":"a","hyp":"好。"}"#,
            "\n",
            r#"{"id":"a","hyp":"好。"}"#,
            "\n",
        );
        match read_corpus(io::Cursor::new(data)).unwrap_err() {
            CorpusError::DuplicateId { line, id } => {
                assert_eq!(line, 2);
                assert_eq!(id, "a");
            }
            other => panic!("expected DuplicateId, got {other}"),
        }
    }

    #[test]
    fn read_accepts_presegmented_documents() {
        let data = r#"{"id":"a","hyp":"你好。再见。","ref":"你好。再见。","segments":["你好。","再见。"]}"#;
        let docs = read_corpus(io::Cursor::new(data)).unwrap();
        assert_eq!(
            docs[0].vad_segments.as_deref(),
            Some(&["你好。".to_string(), "再见。".to_string()][..])
        );
    }

    #[test]
    fn read_rejects_mismatching_presegmented_text() {
        let data = r#"{"id":"a","hyp":"你好。","segments":["你好。","再见。"]}"#;
        assert!(matches!(
            read_corpus(io::Cursor::new(data)),
            Err(CorpusError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn corpus_round_trips_through_writer() {
        let docs = vec![
            Document::new("a", "你好。").with_ref("你好。"),
            Document::new("b", "再见。"),
        ];
        let mut buf = Vec::new();
        write_corpus(&docs, &mut buf).unwrap();
        let back = read_corpus(io::Cursor::new(buf)).unwrap();
        assert_eq!(back, docs);
    }

    #[test]
    fn derive_seed_is_stable_and_id_sensitive() {
        assert_eq!(derive_seed(7, "doc-1"), derive_seed(7, "doc-1"));
        assert_ne!(derive_seed(7, "doc-1"), derive_seed(7, "doc-2"));
        assert_ne!(derive_seed(7, "doc-1"), derive_seed(8, "doc-1"));
    }

    #[test]
    fn segmentize_single_sentence() {
        let doc = Document::new("d", "你好。").with_ref("你好。");
        let pairs = segmentize(&doc, 5, 1).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].hyp_segment, "你好。");
        assert_eq!(pairs[0].ref_segment.as_deref(), Some("你好。"));
        assert_eq!(pairs[0].sentence_count, 1);
    }

    #[test]
    fn segmentize_is_deterministic() {
        let text = "句子。".repeat(10);
        let doc = Document::new("d", text.clone()).with_ref(text);
        let a = segmentize(&doc, 5, 42).unwrap();
        let b = segmentize(&doc, 5, 42).unwrap();
        assert_eq!(a, b);
        let c = segmentize(&doc, 5, 43).unwrap();
        // A different seed may or may not produce the same grouping, but the
        // round trip must hold either way.
        let concat: String = c.iter().map(|p| p.hyp_segment.as_str()).collect();
        assert_eq!(concat, doc.hyp_text);
    }

    #[test]
    fn segmentize_max_one_splits_every_sentence() {
        let doc = Document::new("d", "一。二。三。");
        let pairs = segmentize(&doc, 1, 0).unwrap();
        assert_eq!(pairs.len(), 3);
        assert!(pairs.iter().all(|p| p.sentence_count == 1));
    }

    #[test]
    fn segmentize_projects_reference_around_deleted_region() {
        // The hypothesis lost "在家" from the middle sentence; the projected
        // reference cuts must still bracket the full middle sentence.
        let doc =
            Document::new("d", "今天下雨了。我们。好吗？").with_ref("今天下雨了。我们在家。好吗？");
        let pairs = segmentize(&doc, 1, 0).unwrap();
        let refs: Vec<&str> = pairs
            .iter()
            .map(|p| p.ref_segment.as_deref().unwrap())
            .collect();
        assert_eq!(refs, vec!["今天下雨了。", "我们在家。", "好吗？"]);
    }

    #[test]
    fn segmentize_empty_hyp_is_rejected() {
        let doc = Document {
            id: "d".into(),
            hyp_text: String::new(),
            ref_text: None,
            vad_segments: None,
        };
        assert!(matches!(
            segmentize(&doc, 5, 0),
            Err(CorpusError::EmptyHyp { .. })
        ));
    }

    #[test]
    fn segmentize_zero_max_sentences_is_rejected() {
        let doc = Document::new("d", "好。");
        assert!(matches!(
            segmentize(&doc, 0, 0),
            Err(CorpusError::InvalidMaxSentences)
        ));
    }

    #[test]
    fn segmentize_keeps_vad_chunks() {
        let doc = Document {
            id: "d".into(),
            hyp_text: "你好。再见。还有一句。".into(),
            ref_text: Some("你好。再见。还有一句。".into()),
            vad_segments: Some(vec!["你好。再见。".into(), "还有一句。".into()]),
        };
        let pairs = segmentize(&doc, 5, 0).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].hyp_segment, "你好。再见。");
        assert_eq!(pairs[0].sentence_count, 2);
        assert_eq!(pairs[1].ref_segment.as_deref(), Some("还有一句。"));
    }

    #[test]
    fn export_produces_two_messages_per_segment() {
        let text = "第一句。第二句。第三句。";
        let docs = vec![Document::new("d", text).with_ref(text)];
        let options = PrepareOptions {
            max_sentences: 1,
            ..PrepareOptions::default()
        };
        let mut buf = Vec::new();
        let written =
            export_training_chats(&docs, &options, PinyinTable::builtin(), &mut buf).unwrap();
        assert_eq!(written, 1);
        let line = String::from_utf8(buf).unwrap();
        let conversation: Conversation = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(conversation.messages().len(), 6);
        assert!(conversation.messages()[0].content.contains(text));
        assert_eq!(conversation.messages()[1].content, "第一句。");
    }

    #[test]
    fn export_empty_corpus_writes_nothing() {
        let mut buf = Vec::new();
        let written = export_training_chats(
            &[],
            &PrepareOptions::default(),
            PinyinTable::builtin(),
            &mut buf,
        )
        .unwrap();
        assert_eq!(written, 0);
        assert!(buf.is_empty());
    }

    #[test]
    fn export_requires_reference() {
        let docs = vec![Document::new("doc-7", "你好。")];
        let got = export_training_chats(
            &docs,
            &PrepareOptions::default(),
            PinyinTable::builtin(),
            &mut Vec::new(),
        );
        match got.unwrap_err() {
            CorpusError::MissingRef { id } => assert_eq!(id, "doc-7"),
            other => panic!("expected MissingRef, got {other}"),
        }
    }

    proptest! {
        #[test]
        fn segmentation_round_trip_under_noise(doc_seed in 0u64..500, split_seed in 0u64..16) {
            let clean = synth::generate_clean_documents(1, doc_seed).pop().unwrap();
            let profile = NoiseProfile {
                sub_rate: 0.08,
                del_rate: 0.03,
                ins_rate: 0.02,
                punct_drop_rate: 0.3,
                number_verbalize_rate: 0.5,
                lowercase_english: true,
                filler_rate: 0.02,
                seed: doc_seed,
            };
            let noisy = simulate_corpus(&[clean], &profile).pop().unwrap();
            let pairs = segmentize(&noisy, 5, split_seed).unwrap();
            let hyp: String = pairs.iter().map(|p| p.hyp_segment.as_str()).collect();
            prop_assert_eq!(hyp, noisy.hyp_text.clone());
            let reference: String = pairs
                .iter()
                .map(|p| p.ref_segment.as_deref().unwrap())
                .collect();
            prop_assert_eq!(reference, noisy.ref_text.clone().unwrap());
            for p in &pairs {
                prop_assert!((1..=5).contains(&p.sentence_count));
            }
        }
    }
}
