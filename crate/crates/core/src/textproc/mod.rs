//! Unicode-aware text processing for mixed Chinese/English ASR output.
//!
//! Everything here is pure and allocation-only: tokenization into classified
//! units, sentence splitting on terminal punctuation, and pinyin
//! transliteration backed by a character table.

mod pinyin;

pub use pinyin::{to_pinyin, PinyinTable, PinyinTableError};

use serde::{Deserialize, Serialize};

/// Category of an atomic text unit, used to decompose error rates.
///
/// The categories partition every non-whitespace character of a document:
/// CJK ideographs are scored per character, code-switched English per word,
/// digit spans as single ITN units, punctuation per mark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenCategory {
    /// A single CJK ideograph.
    Mandarin,
    /// A maximal run of Latin letters (internal apostrophes allowed).
    CsEnglish,
    /// A maximal digit run, optionally with internal `.` `,` `%` `:`.
    Itn,
    /// A single punctuation mark, ASCII or CJK/fullwidth.
    Punctuation,
}

impl TokenCategory {
    pub const ALL: [TokenCategory; 4] = [
        TokenCategory::Mandarin,
        TokenCategory::CsEnglish,
        TokenCategory::Itn,
        TokenCategory::Punctuation,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TokenCategory::Mandarin => "mandarin",
            TokenCategory::CsEnglish => "cs_english",
            TokenCategory::Itn => "itn",
            TokenCategory::Punctuation => "punctuation",
        }
    }
}

/// A classified atomic text unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub category: TokenCategory,
    /// Offset of the first character of `surface` into the source string,
    /// counted in scalar characters (not bytes).
    pub char_offset: usize,
}

impl Token {
    pub fn new(surface: impl Into<String>, category: TokenCategory, char_offset: usize) -> Self {
        Token {
            surface: surface.into(),
            category,
            char_offset,
        }
    }
}

/// One sentence of a document, ending with its terminal mark when present.
///
/// Concatenating the `text` of all sentences reproduces the document exactly;
/// a trailing unterminated fragment becomes a final sentence with
/// `terminal == None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub text: String,
    pub terminal: Option<char>,
}

/// CJK ideograph test: the unified block plus Extension A.
#[inline]
pub fn is_cjk(ch: char) -> bool {
    matches!(ch, '\u{4E00}'..='\u{9FFF}' | '\u{3400}'..='\u{4DBF}')
}

/// Sentence-terminal punctuation: fullwidth 。？！ and ASCII . ? !
#[inline]
pub fn is_terminal_punctuation(ch: char) -> bool {
    matches!(ch, '\u{3002}' | '\u{FF1F}' | '\u{FF01}' | '.' | '?' | '!')
}

#[inline]
fn is_latin_letter(ch: char) -> bool {
    // ASCII letters plus Latin-1/Extended accented letters for loanwords.
    ch.is_ascii_alphabetic() || (matches!(ch, '\u{00C0}'..='\u{024F}') && ch.is_alphabetic())
}

#[inline]
fn is_apostrophe(ch: char) -> bool {
    ch == '\'' || ch == '\u{2019}'
}

/// Punctuation in the ASCII range or one of the common symbol blocks
/// (general punctuation, CJK symbols, fullwidth/halfwidth forms).
#[inline]
pub(crate) fn is_punctuation_char(ch: char) -> bool {
    ch.is_ascii_punctuation()
        || matches!(ch,
            '\u{2000}'..='\u{206F}'     // general punctuation: “” ‘’ — … ‰
            | '\u{2E00}'..='\u{2E7F}'   // supplemental punctuation
            | '\u{3001}'..='\u{303F}'   // CJK symbols: 、。《》「」【】
            | '\u{FF01}'..='\u{FF0F}'   // fullwidth ！＂＃ … ／
            | '\u{FF1A}'..='\u{FF20}'   // fullwidth ：；＜ … ＠
            | '\u{FF3B}'..='\u{FF40}'
            | '\u{FF5B}'..='\u{FF65}') // fullwidth braces, halfwidth 。「」
}

/// Split text into classified tokens.
///
/// Every non-whitespace character is covered by exactly one token, in source
/// order. CJK ideographs become single-character `Mandarin` tokens, Latin
/// runs one `CsEnglish` token, digit runs (with internal `.` `,` `%` `:`
/// folded in) one `Itn` token, and punctuation single `Punctuation` tokens.
/// Characters outside all known classes fall back to `Mandarin` so that
/// coverage never has holes.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            i += 1;
        } else if is_cjk(ch) {
            tokens.push(Token::new(ch.to_string(), TokenCategory::Mandarin, i));
            i += 1;
        } else if is_latin_letter(ch) {
            let start = i;
            let mut surface = String::new();
            while i < chars.len() {
                let c = chars[i];
                if is_latin_letter(c) {
                    surface.push(c);
                    i += 1;
                } else if is_apostrophe(c) && i + 1 < chars.len() && is_latin_letter(chars[i + 1]) {
                    // internal apostrophe: "don't", "it's"
                    surface.push(c);
                    i += 1;
                } else {
                    break;
                }
            }
            tokens.push(Token::new(surface, TokenCategory::CsEnglish, start));
        } else if ch.is_ascii_digit() {
            let start = i;
            let mut surface = String::new();
            while i < chars.len() {
                let c = chars[i];
                if c.is_ascii_digit() {
                    surface.push(c);
                    i += 1;
                } else if matches!(c, '.' | ',' | '%' | ':')
                    && i + 1 < chars.len()
                    && chars[i + 1].is_ascii_digit()
                {
                    // internal symbol: "45.17", "1,000", "12:30"
                    surface.push(c);
                    i += 1;
                } else {
                    break;
                }
            }
            tokens.push(Token::new(surface, TokenCategory::Itn, start));
        } else {
            let category = if is_punctuation_char(ch) {
                TokenCategory::Punctuation
            } else {
                TokenCategory::Mandarin
            };
            tokens.push(Token::new(ch.to_string(), category, i));
            i += 1;
        }
    }
    tokens
}

/// Split text into sentences, cutting immediately after every terminal mark.
///
/// No abbreviation handling: a `.` inside "3.14" cuts like any other period.
/// Whitespace after a terminal attaches to the following sentence, so the
/// concatenation of all sentence texts reproduces the input exactly.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    let mut sentences = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        current.push(ch);
        if is_terminal_punctuation(ch) {
            sentences.push(Sentence {
                text: std::mem::take(&mut current),
                terminal: Some(ch),
            });
        }
    }
    if !current.is_empty() {
        sentences.push(Sentence {
            text: current,
            terminal: None,
        });
    }
    sentences
}
