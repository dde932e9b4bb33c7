//! Multi-turn message template for chained segment correction, plus token
//! budgeting for long sessions.
//!
//! A correction conversation opens with one user message carrying the
//! instruction, the full pre-recognized text as context, and the first
//! segment's guidance; every later user turn carries one segment's guidance,
//! and every assistant turn the corrected segment. A document with K
//! segments therefore completes in exactly 2K messages.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, SegmentPair};
use crate::textproc::{to_pinyin, PinyinTable};

/// Default correction instruction (the first user turn opens with this):
/// correct recognition errors, restore punctuation, convert numbers and
/// similar spans to written form, and answer with the corrected segment
/// only.
pub const DEFAULT_INSTRUCTION: &str = "请根据下面给出的语音识别全文，逐段修正识别结果：纠正错别字，恢复标点符号，并把数字、日期等内容转换为书面形式。每轮只输出当前一段修正后的文本，不要添加任何解释。";

/// Separator between instruction, full-text context, and first-segment
/// guidance inside message 0. Fixed for reproducibility.
pub const SECTION_SEPARATOR: &str = "\n\n";

/// What each user turn carries as per-segment guidance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuidanceMode {
    /// The pre-recognized segment text itself.
    #[default]
    Hyp,
    /// The segment transliterated to tone-numbered pinyin.
    Pinyin,
}

impl GuidanceMode {
    /// Render the guidance content for one segment.
    pub fn render(self, segment: &SegmentPair, table: &PinyinTable) -> String {
        match self {
            GuidanceMode::Hyp => segment.hyp_segment.clone(),
            GuidanceMode::Pinyin => to_pinyin(&segment.hyp_segment, table),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChatError {
    #[error("cannot build a conversation from zero segments")]
    EmptySegments,
    #[error("segment texts do not concatenate to the full pre-recognized text")]
    ContextMismatch,
    #[error("conversation has no messages")]
    Empty,
    #[error("message {index} has empty content")]
    EmptyContent { index: usize },
    #[error("message {index} breaks the user/assistant alternation")]
    RoleOrder { index: usize },
    #[error("plan has {expected} user turns but {got} assistant replies were supplied")]
    ReplyCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

/// One chat message. Within a [`Conversation`] contents are non-empty and
/// roles strictly alternate starting with [`Role::User`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// An alternating chat transcript.
///
/// May end on a user turn while a session is in flight; a completed
/// conversation ends on an assistant turn and holds exactly
/// `2 * n_segments` messages. Serializes to the wire format
/// `{"messages":[{"role":..,"content":..},..]}`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "WireConversation", into = "WireConversation")]
pub struct Conversation {
    messages: Vec<Message>,
}

#[derive(Serialize, Deserialize)]
struct WireConversation {
    messages: Vec<Message>,
}

impl From<Conversation> for WireConversation {
    fn from(c: Conversation) -> Self {
        WireConversation {
            messages: c.messages,
        }
    }
}

impl TryFrom<WireConversation> for Conversation {
    type Error = ChatError;

    fn try_from(w: WireConversation) -> Result<Self, ChatError> {
        Conversation::from_messages(w.messages)
    }
}

impl Conversation {
    pub fn new() -> Self {
        Conversation::default()
    }

    /// Validate and adopt an existing message list.
    pub fn from_messages(messages: Vec<Message>) -> Result<Self, ChatError> {
        let c = Conversation { messages };
        c.validate()?;
        Ok(c)
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn into_messages(self) -> Vec<Message> {
        self.messages
    }

    /// Number of segments this conversation covers (= user turns so far).
    pub fn n_segments(&self) -> usize {
        self.messages.len().div_ceil(2)
    }

    /// True once the last segment has been answered.
    pub fn is_complete(&self) -> bool {
        matches!(self.messages.last(), Some(m) if m.role == Role::Assistant)
    }

    pub fn push_user(&mut self, content: impl Into<String>) -> Result<(), ChatError> {
        self.push(Message::user(content))
    }

    pub fn push_assistant(&mut self, content: impl Into<String>) -> Result<(), ChatError> {
        self.push(Message::assistant(content))
    }

    fn push(&mut self, message: Message) -> Result<(), ChatError> {
        let index = self.messages.len();
        if message.content.is_empty() {
            return Err(ChatError::EmptyContent { index });
        }
        let expected = if index.is_multiple_of(2) {
            Role::User
        } else {
            Role::Assistant
        };
        if message.role != expected {
            return Err(ChatError::RoleOrder { index });
        }
        self.messages.push(message);
        Ok(())
    }

    /// Check all invariants: at least one message, non-empty contents,
    /// strict alternation starting with the user.
    pub fn validate(&self) -> Result<(), ChatError> {
        if self.messages.is_empty() {
            return Err(ChatError::Empty);
        }
        for (index, m) in self.messages.iter().enumerate() {
            if m.content.is_empty() {
                return Err(ChatError::EmptyContent { index });
            }
            let expected = if index % 2 == 0 {
                Role::User
            } else {
                Role::Assistant
            };
            if m.role != expected {
                return Err(ChatError::RoleOrder { index });
            }
        }
        Ok(())
    }
}

/// The user side of a correction conversation, before any assistant turns
/// exist: one entry per segment, in order. Entry 0 already carries the
/// instruction and full-text context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConversationPlan {
    pub user_turns: Vec<String>,
}

impl ConversationPlan {
    pub fn n_segments(&self) -> usize {
        self.user_turns.len()
    }

    /// Assemble the completed conversation by interleaving one assistant
    /// reply after each user turn (used for training export, where replies
    /// are the reference segments).
    pub fn complete<S: AsRef<str>>(&self, replies: &[S]) -> Result<Conversation, ChatError> {
        if replies.len() != self.user_turns.len() {
            return Err(ChatError::ReplyCount {
                expected: self.user_turns.len(),
                got: replies.len(),
            });
        }
        let mut conversation = Conversation::new();
        for (turn, reply) in self.user_turns.iter().zip(replies) {
            conversation.push_user(turn.clone())?;
            conversation.push_assistant(reply.as_ref())?;
        }
        Ok(conversation)
    }
}

/// Lay out the user turns for a document's correction session.
///
/// Message 0 is `instruction ⏎⏎ full_hyp ⏎⏎ guidance(segment 0)`; each later
/// turn is `guidance(segment i)` alone. Assistant slots are left to the
/// caller: the engine fills them with emitted corrections, training export
/// with reference segments.
pub fn build_conversation(
    full_hyp: &str,
    segments: &[SegmentPair],
    guidance: GuidanceMode,
    instruction: &str,
    table: &PinyinTable,
) -> Result<ConversationPlan, ChatError> {
    if segments.is_empty() {
        return Err(ChatError::EmptySegments);
    }
    let concat: String = segments.iter().map(|s| s.hyp_segment.as_str()).collect();
    if concat != full_hyp {
        return Err(ChatError::ContextMismatch);
    }
    let mut user_turns = Vec::with_capacity(segments.len());
    user_turns.push(format!(
        "{instruction}{SECTION_SEPARATOR}{full_hyp}{SECTION_SEPARATOR}{}",
        guidance.render(&segments[0], table)
    ));
    for segment in &segments[1..] {
        user_turns.push(guidance.render(segment, table));
    }
    Ok(ConversationPlan { user_turns })
}

/// Heuristic token count: ceil(0.67 × character count), calibrated so a
/// ~6,000-character article lands near 4k tokens. Computed in integer
/// arithmetic to keep it exact and monotone.
pub fn estimate_tokens(text: &str) -> usize {
    let chars = text.chars().count();
    (67 * chars).div_ceil(100)
}

/// Estimated total tokens for one correction session: the full text rides in
/// the context once and roughly twice more across guidance and corrected
/// segments, so the session costs about 3× the article itself.
pub fn estimate_session_tokens(doc: &Document) -> usize {
    3 * estimate_tokens(&doc.hyp_text)
}
