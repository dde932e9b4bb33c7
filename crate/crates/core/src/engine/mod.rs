//! The correction session state machine: one conversation per document,
//! one model query per segment, each correction accepted or rejected by the
//! error-rate gate before it becomes context for the next turn.

mod client;

pub use client::{
    completion_request_body, extract_completion_content, ClientError, CompletionRecord,
    CompletionRequest, HttpClient, HttpClientConfig, IdentityMock, LlmClient, OracleMock,
    RecordingClient, ReplayClient,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{error_rate, MetricReport, ReportAccumulator};
use crate::chat::{
    build_conversation, estimate_session_tokens, ChatError, Conversation, GuidanceMode,
    DEFAULT_INSTRUCTION,
};
use crate::corpus::{segmentize, CorpusError, Document, SegmentPair};
use crate::textproc::{tokenize, PinyinTable};

/// Session policy knobs. The defaults mirror the evaluated setup: threshold
/// 0.3, no gate retries, plain-text guidance, greedy sampling, and a 256k
/// context budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Correction threshold: a correction is accepted iff the error rate
    /// between the pre-recognized segment and the model output does not
    /// exceed this. Must be > 0.
    pub threshold: f64,
    /// Extra queries allowed per segment after a rejected correction.
    pub max_retries: u32,
    pub guidance: GuidanceMode,
    /// Sessions estimated beyond this token budget warn (or abort under
    /// `strict_context`).
    pub context_limit_tokens: usize,
    pub temperature: f64,
    /// Sampling temperature for gate-retry queries; the identical prefix is
    /// re-sent, so retries need nonzero temperature to differ.
    pub retry_temperature: f64,
    /// Abort instead of warn when a session exceeds the context budget.
    pub strict_context: bool,
    /// Keep the model's rejected output in the chat history instead of the
    /// retained original. Off by default so history always matches what was
    /// emitted.
    pub keep_rejected_output_in_history: bool,
    /// Overrides the built-in correction instruction when set.
    pub instruction: Option<String>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            threshold: 0.3,
            max_retries: 0,
            guidance: GuidanceMode::Hyp,
            context_limit_tokens: 256_000,
            temperature: 0.0,
            retry_temperature: 0.7,
            strict_context: false,
            keep_rejected_output_in_history: false,
            instruction: None,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        // NaN must be rejected too, hence the explicit check.
        if self.threshold.is_nan() || self.threshold <= 0.0 {
            return Err(SessionError::Config(format!(
                "threshold must be greater than 0, got {}",
                self.threshold
            )));
        }
        if self.temperature < 0.0 || self.retry_temperature < 0.0 {
            return Err(SessionError::Config(
                "sampling temperatures must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// The gate's verdict on one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentDecision {
    pub index: usize,
    /// What the model answered (last attempt).
    pub model_output: String,
    /// Error rate between the pre-recognized segment (reference side) and
    /// the model output.
    pub gate_er: f64,
    pub accepted: bool,
    pub retries_used: u32,
    /// The text that entered the corrected document: the model output when
    /// accepted, the original segment otherwise.
    pub emitted: String,
}

/// Outcome of one document's correction session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub doc_id: String,
    pub decisions: Vec<SegmentDecision>,
    /// Concatenation of every decision's emitted text, in segment order.
    pub corrected_text: String,
    /// Fraction of segments whose correction was accepted.
    pub correction_ratio: f64,
    pub transcript: Conversation,
}

/// A session cut short by a failure, with everything completed so far.
#[derive(Debug, Default)]
pub struct PartialSession {
    pub transcript: Conversation,
    pub decisions: Vec<SegmentDecision>,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid engine configuration: {0}")]
    Config(String),
    #[error("document {doc_id:?}: {source}")]
    Corpus {
        doc_id: String,
        #[source]
        source: CorpusError,
    },
    #[error("document {doc_id:?}: {source}")]
    Chat {
        doc_id: String,
        #[source]
        source: ChatError,
    },
    #[error("document {doc_id:?}, segment {segment_index}: {source}")]
    Client {
        doc_id: String,
        segment_index: usize,
        #[source]
        source: ClientError,
        partial: Box<PartialSession>,
    },
    #[error(
        "document {doc_id:?}: estimated session length {estimated} tokens exceeds the \
         context limit of {limit}"
    )]
    ContextOverflow {
        doc_id: String,
        estimated: usize,
        limit: usize,
    },
}

impl SessionError {
    pub fn doc_id(&self) -> Option<&str> {
        match self {
            SessionError::Config(_) => None,
            SessionError::Corpus { doc_id, .. }
            | SessionError::Chat { doc_id, .. }
            | SessionError::Client { doc_id, .. }
            | SessionError::ContextOverflow { doc_id, .. } => Some(doc_id),
        }
    }
}

/// Run one document's correction session.
///
/// For each segment in order: query the client on the conversation so far,
/// gate the output by `error_rate(pre-recognized segment, output)`, accept
/// iff the rate is ≤ the threshold (exact comparison, no epsilon), retry a
/// rejected segment up to `max_retries` times, and finally emit either the
/// accepted output or the retained original. The emitted text — not the
/// rejected output, unless configured otherwise — becomes the assistant
/// turn that later segments see as context.
pub fn run_session(
    doc: &Document,
    segments: &[SegmentPair],
    client: &dyn LlmClient,
    cfg: &EngineConfig,
    table: &PinyinTable,
) -> Result<SessionResult, SessionError> {
    cfg.validate()?;
    let estimated = estimate_session_tokens(doc);
    if estimated > cfg.context_limit_tokens {
        if cfg.strict_context {
            return Err(SessionError::ContextOverflow {
                doc_id: doc.id.clone(),
                estimated,
                limit: cfg.context_limit_tokens,
            });
        }
        log::warn!(
            "document {}: estimated session length {estimated} tokens exceeds the context \
             limit of {}; proceeding",
            doc.id,
            cfg.context_limit_tokens
        );
    }

    let instruction = cfg.instruction.as_deref().unwrap_or(DEFAULT_INSTRUCTION);
    let plan = build_conversation(&doc.hyp_text, segments, cfg.guidance, instruction, table)
        .map_err(|source| SessionError::Chat {
            doc_id: doc.id.clone(),
            source,
        })?;

    let chat_err = |source| SessionError::Chat {
        doc_id: doc.id.clone(),
        source,
    };
    let mut conversation = Conversation::new();
    let mut decisions: Vec<SegmentDecision> = Vec::with_capacity(segments.len());
    let mut corrected_text = String::with_capacity(doc.hyp_text.len());
    for (segment, user_turn) in segments.iter().zip(&plan.user_turns) {
        conversation
            .push_user(user_turn.clone())
            .map_err(chat_err)?;
        let hyp_tokens = tokenize(&segment.hyp_segment);

        let mut attempt = 0;
        let (model_output, gate_er, accepted) = loop {
            let request = CompletionRequest {
                doc_id: &doc.id,
                segment_index: segment.index,
                attempt,
                temperature: if attempt == 0 {
                    cfg.temperature
                } else {
                    cfg.retry_temperature
                },
                messages: conversation.messages(),
                segment,
            };
            let output = match client.complete(&request) {
                Ok(output) => output,
                Err(source) => {
                    return Err(SessionError::Client {
                        doc_id: doc.id.clone(),
                        segment_index: segment.index,
                        source,
                        partial: Box::new(PartialSession {
                            transcript: conversation,
                            decisions,
                        }),
                    })
                }
            };
            let gate_er = error_rate(&hyp_tokens, &tokenize(&output));
            if gate_er <= cfg.threshold {
                break (output, gate_er, true);
            }
            if attempt >= cfg.max_retries {
                break (output, gate_er, false);
            }
            attempt += 1;
        };

        let emitted = if accepted {
            model_output.clone()
        } else {
            segment.hyp_segment.clone()
        };
        let history = if cfg.keep_rejected_output_in_history && !accepted {
            &model_output
        } else {
            &emitted
        };
        // An empty string cannot enter the chat history; fall back to the
        // original segment so the transcript stays well-formed.
        let history = if history.is_empty() {
            &segment.hyp_segment
        } else {
            history
        };
        conversation
            .push_assistant(history.clone())
            .map_err(chat_err)?;
        corrected_text.push_str(&emitted);
        decisions.push(SegmentDecision {
            index: segment.index,
            model_output,
            gate_er,
            accepted,
            retries_used: attempt,
            emitted,
        });
    }

    let accepted_count = decisions.iter().filter(|d| d.accepted).count();
    let correction_ratio = accepted_count as f64 / decisions.len() as f64;
    Ok(SessionResult {
        doc_id: doc.id.clone(),
        decisions,
        corrected_text,
        correction_ratio,
        transcript: conversation,
    })
}

/// Batch-level knobs: segmentation parameters plus the worker count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchOptions {
    /// Worker threads for document-level parallelism; 0 lets the runtime
    /// pick.
    pub parallelism: usize,
    pub max_sentences: usize,
    pub seed: u64,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            parallelism: 0,
            max_sentences: 5,
            seed: 0,
        }
    }
}

/// Results of a corpus run: per-document sessions in input order, failures
/// kept aside, and micro-averaged metric reports over the documents that
/// completed and carry references.
#[derive(Debug)]
pub struct BatchOutcome {
    pub sessions: Vec<SessionResult>,
    pub failures: Vec<SessionError>,
    /// Corrected-vs-reference report with ERR filled in against the
    /// baseline; `None` when no completed document has a reference.
    pub report: Option<MetricReport>,
    /// Hypothesis-vs-reference report for the same documents.
    pub baseline_report: Option<MetricReport>,
}

impl BatchOutcome {
    /// Accepted corrections over all segments of all completed sessions.
    pub fn correction_ratio(&self) -> f64 {
        let total: usize = self.sessions.iter().map(|s| s.decisions.len()).sum();
        if total == 0 {
            return 0.0;
        }
        let accepted: usize = self
            .sessions
            .iter()
            .flat_map(|s| &s.decisions)
            .filter(|d| d.accepted)
            .count();
        accepted as f64 / total as f64
    }
}

/// Correct a corpus document by document.
///
/// Documents are segmentized with `(options.seed, doc.id)`-derived streams
/// and corrected independently (in parallel when `parallelism != 1`), so
/// results do not depend on scheduling. A failing document is recorded and
/// the batch continues. Reports micro-average S/D/I and N over documents:
/// category counts are summed first and divided once, so batching cannot
/// change the totals.
pub fn run_batch(
    docs: &[Document],
    client: &dyn LlmClient,
    cfg: &EngineConfig,
    options: &BatchOptions,
    table: &PinyinTable,
) -> Result<BatchOutcome, SessionError> {
    cfg.validate()?;

    let run_one = |doc: &Document| -> Result<SessionResult, SessionError> {
        let segments = segmentize(doc, options.max_sentences, options.seed).map_err(|source| {
            SessionError::Corpus {
                doc_id: doc.id.clone(),
                source,
            }
        })?;
        run_session(doc, &segments, client, cfg, table)
    };

    let results: Vec<Result<SessionResult, SessionError>> = if options.parallelism == 1 {
        docs.iter().map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.parallelism)
            .build()
            .map_err(|e| SessionError::Config(format!("failed to build thread pool: {e}")))?;
        pool.install(|| docs.par_iter().map(run_one).collect())
    };

    let mut sessions = Vec::with_capacity(docs.len());
    let mut failures = Vec::new();
    let mut corrected_acc = ReportAccumulator::new();
    let mut baseline_acc = ReportAccumulator::new();
    let mut any_ref = false;
    for (doc, result) in docs.iter().zip(results) {
        match result {
            Ok(session) => {
                if let Some(ref_text) = &doc.ref_text {
                    any_ref = true;
                    corrected_acc.add_pair(ref_text, &session.corrected_text);
                    baseline_acc.add_pair(ref_text, &doc.hyp_text);
                }
                sessions.push(session);
            }
            Err(error) => failures.push(error),
        }
    }

    let (report, baseline_report) = if any_ref {
        let baseline = baseline_acc.finalize();
        let corrected = corrected_acc.finalize().with_baseline(&baseline);
        (Some(corrected), Some(baseline))
    } else {
        (None, None)
    };
    Ok(BatchOutcome {
        sessions,
        failures,
        report,
        baseline_report,
    })
}
