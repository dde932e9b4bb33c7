//! Full-text ASR error correction via chained, threshold-gated segment
//! correction.
//!
//! An ASR hypothesis document is split into segments of a few sentences
//! each; a chat model corrects them one turn at a time, with the full
//! pre-recognized text as up-front context and each pre-recognized segment
//! as per-turn guidance. Every correction passes an error-rate gate before
//! it is allowed to replace the original segment or to become context for
//! later turns, so a wandering model can never make a document worse than
//! its input. Evaluation decomposes error rates per token category
//! (Mandarin characters, code-switched English words, written-form numbers,
//! punctuation).
//!
//! The crate is organized as five modules:
//!
//! - [`textproc`]: tokenization into classified units, sentence splitting,
//!   pinyin transliteration.
//! - [`align`]: unit-cost edit alignment, error rates (overall and per
//!   category), boundary projection.
//! - [`corpus`]: JSONL corpora, alignment-based segmentation, synthetic
//!   error injection, training-chat export.
//! - [`chat`]: the multi-turn message template and token budgeting.
//! - [`engine`]: the session state machine, the gate, and chat-completion
//!   clients (HTTP, mocks, record/replay).

pub mod align;
pub mod chat;
pub mod corpus;
pub mod engine;
pub mod textproc;

pub use align::{
    align, categorized_report, edit_distance, err, error_rate, project_boundary, Alignment,
    CategoryMetrics, EditOp, MetricReport, ReportAccumulator, UndefinedErr,
};
pub use chat::{
    build_conversation, estimate_session_tokens, estimate_tokens, ChatError, Conversation,
    ConversationPlan, GuidanceMode, Message, Role, DEFAULT_INSTRUCTION,
};
pub use corpus::{
    derive_seed, export_training_chats, inject_noise, inject_noise_detailed, load_corpus,
    read_corpus, segmentize, simulate_corpus, write_corpus, CorpusError, Document, NoiseOutcome,
    NoiseProfile, PrepareOptions, SegmentPair,
};
pub use engine::{
    run_batch, run_session, BatchOptions, BatchOutcome, ClientError, CompletionRecord,
    CompletionRequest, EngineConfig, HttpClient, HttpClientConfig, IdentityMock, LlmClient,
    OracleMock, PartialSession, RecordingClient, ReplayClient, SegmentDecision, SessionError,
    SessionResult,
};
pub use textproc::{
    split_sentences, to_pinyin, tokenize, PinyinTable, PinyinTableError, Sentence, Token,
    TokenCategory,
};
