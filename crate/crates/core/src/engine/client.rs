//! Chat-completion backends: a real HTTP client plus the mock, recording,
//! and replay clients that make every engine behavior testable offline.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chat::Message;
use crate::corpus::SegmentPair;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed completion response: {0}")]
    Protocol(String),
    #[error("document {doc_id:?} segment {segment_index} has no reference for the oracle client")]
    MissingReference {
        doc_id: String,
        segment_index: usize,
    },
    #[error(
        "no recorded output for document {doc_id:?} segment {segment_index} attempt {attempt}"
    )]
    MissingRecording {
        doc_id: String,
        segment_index: usize,
        attempt: u32,
    },
    #[error("failed to read replay file: {0}")]
    Io(#[from] std::io::Error),
    #[error("replay file line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
}

/// One completion query: the conversation so far (ending on the user turn
/// for the current segment) plus enough session context for clients that
/// look things up rather than generate.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub doc_id: &'a str,
    pub segment_index: usize,
    /// 0 for the first query of a segment, counting up across gate retries.
    pub attempt: u32,
    pub temperature: f64,
    pub messages: &'a [Message],
    pub segment: &'a SegmentPair,
}

/// A chat-completion backend. Must be callable from multiple sessions at
/// once; wrap a single-threaded backend in a mutex adapter if needed.
pub trait LlmClient: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ClientError>;
}

impl<T: LlmClient + ?Sized> LlmClient for &T {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ClientError> {
        (**self).complete(request)
    }
}

impl<T: LlmClient + ?Sized> LlmClient for Box<T> {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ClientError> {
        (**self).complete(request)
    }
}

/// Echoes the pre-recognized segment back, leaving the text untouched. The
/// gate always sees a zero error rate, so identity runs expose any
/// plumbing-level mutation of the text.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityMock;

impl LlmClient for IdentityMock {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ClientError> {
        Ok(request.segment.hyp_segment.clone())
    }
}

/// Returns the reference segment — a perfect corrector, for exercising both
/// gate limits.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleMock;

impl LlmClient for OracleMock {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ClientError> {
        request
            .segment
            .ref_segment
            .clone()
            .ok_or_else(|| ClientError::MissingReference {
                doc_id: request.doc_id.to_string(),
                segment_index: request.segment_index,
            })
    }
}

/// One recorded completion, keyed by (document, segment, attempt).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub doc_id: String,
    pub segment_index: usize,
    pub attempt: u32,
    pub output: String,
}

/// Serves completions from a recorded transcript; a missing key is an
/// error, never a silent fallback.
#[derive(Debug, Clone, Default)]
pub struct ReplayClient {
    records: HashMap<(String, usize, u32), String>,
}

impl ReplayClient {
    pub fn from_records(records: impl IntoIterator<Item = CompletionRecord>) -> Self {
        let records = records
            .into_iter()
            .map(|r| ((r.doc_id, r.segment_index, r.attempt), r.output))
            .collect();
        ReplayClient { records }
    }

    /// Load a JSONL replay file of [`CompletionRecord`] lines.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClientError> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, ClientError> {
        let mut records = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: CompletionRecord =
                serde_json::from_str(&line).map_err(|e| ClientError::MalformedRecord {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            records.push(record);
        }
        Ok(Self::from_records(records))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl LlmClient for ReplayClient {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ClientError> {
        let key = (
            request.doc_id.to_string(),
            request.segment_index,
            request.attempt,
        );
        self.records
            .get(&key)
            .cloned()
            .ok_or(ClientError::MissingRecording {
                doc_id: key.0,
                segment_index: key.1,
                attempt: key.2,
            })
    }
}

/// Wraps another client and logs every completion it serves, so a live run
/// can later be replayed deterministically.
pub struct RecordingClient<C> {
    inner: C,
    records: Mutex<Vec<CompletionRecord>>,
}

impl<C> RecordingClient<C> {
    pub fn new(inner: C) -> Self {
        RecordingClient {
            inner,
            records: Mutex::new(Vec::new()),
        }
    }

    pub fn records(&self) -> Vec<CompletionRecord> {
        self.records
            .lock()
            .expect("recording lock poisoned")
            .clone()
    }

    /// Write the recorded completions as replay JSONL.
    pub fn write<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for record in self.records() {
            let line = serde_json::to_string(&record).map_err(std::io::Error::other)?;
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

impl<C: LlmClient> LlmClient for RecordingClient<C> {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ClientError> {
        let output = self.inner.complete(request)?;
        self.records
            .lock()
            .expect("recording lock poisoned")
            .push(CompletionRecord {
                doc_id: request.doc_id.to_string(),
                segment_index: request.segment_index,
                attempt: request.attempt,
                output: output.clone(),
            });
        Ok(output)
    }
}

/// Settings for the HTTP chat-completion backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpClientConfig {
    /// Full chat-completions URL, e.g. `https://host/v1/chat/completions`.
    pub endpoint: String,
    pub model: String,
    /// Bearer token; sent as `Authorization: Bearer …` when present.
    pub api_token: Option<String>,
    /// Extra attempts after a transport failure or retryable status.
    pub transport_retries: u32,
    pub timeout_secs: u64,
}

impl Default for HttpClientConfig {
    fn default() -> Self {
        HttpClientConfig {
            endpoint: String::new(),
            model: String::new(),
            api_token: None,
            transport_retries: 2,
            timeout_secs: 120,
        }
    }
}

/// Talks to an OpenAI-style chat-completions endpoint: POSTs
/// `{"model", "messages", "temperature"}` and reads the first choice's
/// message content.
pub struct HttpClient {
    config: HttpClientConfig,
    agent: ureq::Agent,
}

impl HttpClient {
    pub fn new(config: HttpClientConfig) -> Self {
        let agent_config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build();
        HttpClient {
            config,
            agent: agent_config.into(),
        }
    }

    fn request_once(&self, body: &serde_json::Value) -> Result<String, ClientError> {
        let mut request = self.agent.post(&self.config.endpoint);
        if let Some(token) = &self.config.api_token {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = request
            .send_json(body)
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let body = response
                .body_mut()
                .read_to_string()
                .unwrap_or_else(|_| String::from("<unreadable body>"));
            return Err(ClientError::Status { status, body });
        }
        let json: serde_json::Value = response
            .body_mut()
            .read_json()
            .map_err(|e| ClientError::Protocol(e.to_string()))?;
        extract_completion_content(&json)
    }
}

/// Build the request body for one completion query.
pub fn completion_request_body(
    model: &str,
    messages: &[Message],
    temperature: f64,
) -> serde_json::Value {
    serde_json::json!({
        "model": model,
        "messages": messages,
        "temperature": temperature,
    })
}

/// Pull the first choice's message content out of a chat-completion
/// response.
pub fn extract_completion_content(response: &serde_json::Value) -> Result<String, ClientError> {
    response
        .pointer("/choices/0/message/content")
        .and_then(serde_json::Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| {
            ClientError::Protocol("response has no choices[0].message.content string".into())
        })
}

fn is_retryable(error: &ClientError) -> bool {
    match error {
        ClientError::Transport(_) => true,
        // Rate limits and server-side failures are worth another try;
        // other statuses (auth, bad request) are permanent.
        ClientError::Status { status, .. } => *status == 429 || *status >= 500,
        _ => false,
    }
}

impl LlmClient for HttpClient {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ClientError> {
        let body =
            completion_request_body(&self.config.model, request.messages, request.temperature);
        let mut attempt = 0;
        loop {
            match self.request_once(&body) {
                Ok(content) => return Ok(content),
                Err(e) if is_retryable(&e) && attempt < self.config.transport_retries => {
                    attempt += 1;
                    log::warn!(
                        "completion attempt {attempt} for {}#{} failed ({e}); retrying",
                        request.doc_id,
                        request.segment_index
                    );
                    std::thread::sleep(Duration::from_millis(200 * u64::from(attempt)));
                }
                Err(e) => return Err(e),
            }
        }
    }
}
