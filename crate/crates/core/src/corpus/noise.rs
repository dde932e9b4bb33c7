//! Synthetic ASR-error injection for desk-scale corpora.
//!
//! Corruption happens token by token over a clean text: substitutions swap a
//! token for a random same-category one, punctuation is dropped, numbers are
//! rewritten in spoken form, English loses its casing, and filler syllables
//! creep in — the error classes a correction model is expected to undo.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::textproc::{tokenize, Token, TokenCategory};

/// Per-token corruption rates. All rates are probabilities in `[0, 1]`;
/// the all-zero default (with `lowercase_english` off) is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseProfile {
    /// Replace a non-punctuation token with a random same-category one.
    pub sub_rate: f64,
    /// Drop a non-punctuation token.
    pub del_rate: f64,
    /// Insert a random Mandarin character after a token.
    pub ins_rate: f64,
    /// Drop a punctuation token.
    pub punct_drop_rate: f64,
    /// Rewrite a digit token into spoken-form numerals ("2024"→"二零二四").
    pub number_verbalize_rate: f64,
    /// Lowercase every surviving Latin token (simulates lost truecasing).
    pub lowercase_english: bool,
    /// Insert the filler syllable "呃" after a token.
    pub filler_rate: f64,
    pub seed: u64,
}

impl Default for NoiseProfile {
    fn default() -> Self {
        NoiseProfile {
            sub_rate: 0.0,
            del_rate: 0.0,
            ins_rate: 0.0,
            punct_drop_rate: 0.0,
            number_verbalize_rate: 0.0,
            lowercase_english: false,
            filler_rate: 0.0,
            seed: 0,
        }
    }
}

impl NoiseProfile {
    pub fn rates(&self) -> [f64; 6] {
        [
            self.sub_rate,
            self.del_rate,
            self.ins_rate,
            self.punct_drop_rate,
            self.number_verbalize_rate,
            self.filler_rate,
        ]
    }

    pub fn is_valid(&self) -> bool {
        self.rates().iter().all(|r| (0.0..=1.0).contains(r))
    }
}

/// Edit counts recorded while corrupting a text, in reference-vs-noisy
/// orientation: a dropped token is a deletion a corrector would have to
/// re-insert, an inserted filler is an insertion it would have to remove.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NoiseOutcome {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

impl NoiseOutcome {
    pub fn total_edits(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

/// Replacement pool per category; at least two entries each so a draw can
/// always avoid echoing the original token.
const MANDARIN_POOL: &str = "的一是在不了有和人这中大为上个国我以要他时来用们生到作地于出就分对成会可主发年动同工也能下过子说产种面而方后多定行学法所民得经十三之进着等部度家电力里如水化高自二理起小物现实加量都两体制机当使点从业本去把性好应开它合还因";

const ENGLISH_POOL: [&str; 10] = [
    "model", "data", "cloud", "token", "open", "world", "system", "line", "code", "test",
];

const NUMBER_POOL: [&str; 8] = ["2", "7", "12", "45", "90", "100", "365", "2024"];

const DIGIT_NAMES: [char; 10] = ['零', '一', '二', '三', '四', '五', '六', '七', '八', '九'];

/// Spoken-form rewrite of a digit token, digit by digit; `.` and `:` read as
/// 点, grouping commas and stray symbols vanish.
fn verbalize_number(surface: &str) -> String {
    let mut out = String::new();
    for ch in surface.chars() {
        match ch {
            '0'..='9' => out.push(DIGIT_NAMES[ch as usize - '0' as usize]),
            '.' | ':' => out.push('点'),
            _ => {}
        }
    }
    out
}

fn mandarin_pool_chars() -> Vec<char> {
    MANDARIN_POOL.chars().collect()
}

/// Pick a same-category replacement that differs from `token`'s surface.
fn pick_replacement(rng: &mut ChaCha8Rng, token: &Token, pool: &[char]) -> String {
    match token.category {
        TokenCategory::Mandarin => {
            let idx = rng.random_range(0..pool.len());
            let pick = pool[idx];
            if token.surface.starts_with(pick) {
                pool[(idx + 1) % pool.len()].to_string()
            } else {
                pick.to_string()
            }
        }
        TokenCategory::CsEnglish => {
            let idx = rng.random_range(0..ENGLISH_POOL.len());
            if ENGLISH_POOL[idx] == token.surface {
                ENGLISH_POOL[(idx + 1) % ENGLISH_POOL.len()].to_string()
            } else {
                ENGLISH_POOL[idx].to_string()
            }
        }
        TokenCategory::Itn => {
            let idx = rng.random_range(0..NUMBER_POOL.len());
            if NUMBER_POOL[idx] == token.surface {
                NUMBER_POOL[(idx + 1) % NUMBER_POOL.len()].to_string()
            } else {
                NUMBER_POOL[idx].to_string()
            }
        }
        TokenCategory::Punctuation => unreachable!("punctuation is only ever dropped"),
    }
}

/// Corrupt `clean` according to `profile`. See [`inject_noise_detailed`].
pub fn inject_noise(clean: &str, profile: &NoiseProfile) -> String {
    inject_noise_detailed(clean, profile).0
}

/// Corrupt `clean` and report how many substitutions/deletions/insertions
/// were injected (a number rewritten into k spoken characters counts as one
/// substitution plus k−1 insertions).
///
/// Deterministic for a fixed profile. Each token draws its decisions from a
/// child stream seeded by one draw of the main seeded stream, so whether one
/// token mutates never shifts the randomness any other token sees — raising
/// a single rate can only add events, never reshuffle them.
///
/// Panics if any rate lies outside `[0, 1]`.
pub fn inject_noise_detailed(clean: &str, profile: &NoiseProfile) -> (String, NoiseOutcome) {
    assert!(
        profile.is_valid(),
        "noise profile rates must lie in [0, 1]: {profile:?}"
    );
    let tokens = tokenize(clean);
    let chars: Vec<char> = clean.chars().collect();
    let pool = mandarin_pool_chars();
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let mut out = String::with_capacity(clean.len());
    let mut outcome = NoiseOutcome::default();
    let mut gap_start = 0;

    for token in &tokens {
        let start = token.char_offset;
        let end = start + token.surface.chars().count();
        out.extend(&chars[gap_start..start]);
        gap_start = end;

        let mut child = ChaCha8Rng::seed_from_u64(rng.next_u64());
        if token.category == TokenCategory::Punctuation {
            if child.random_bool(profile.punct_drop_rate) {
                outcome.deletions += 1;
            } else {
                out.push_str(&token.surface);
            }
        } else if child.random_bool(profile.del_rate) {
            outcome.deletions += 1;
        } else if child.random_bool(profile.sub_rate) {
            out.push_str(&pick_replacement(&mut child, token, &pool));
            outcome.substitutions += 1;
        } else if token.category == TokenCategory::Itn
            && child.random_bool(profile.number_verbalize_rate)
        {
            let spoken = verbalize_number(&token.surface);
            outcome.substitutions += 1;
            outcome.insertions += spoken.chars().count() - 1;
            out.push_str(&spoken);
        } else if token.category == TokenCategory::CsEnglish && profile.lowercase_english {
            let lower = token.surface.to_lowercase();
            if lower != token.surface {
                outcome.substitutions += 1;
            }
            out.push_str(&lower);
        } else {
            out.push_str(&token.surface);
        }

        if child.random_bool(profile.ins_rate) {
            out.push(pool[child.random_range(0..pool.len())]);
            outcome.insertions += 1;
        }
        if child.random_bool(profile.filler_rate) {
            out.push('呃');
            outcome.insertions += 1;
        }
    }
    out.extend(&chars[gap_start..]);
    (out, outcome)
}
