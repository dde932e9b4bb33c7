//! Deterministic generation of clean mixed-script documents, the raw
//! material for the noise simulator and for desk-scale test corpora.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{derive_seed, Document};

/// Characters drawn for sentence bodies: common ideographs only, no
/// punctuation, so token categories stay predictable.
const SENTENCE_CHARS: &str = "的一是在不了有和人这中大为上个国我以要他时来用们生到作地于出就分对成会可主发年动同工也能下过子说产种面而方后多定行学法所民得经十三之进着等部度家电力里如水化高自二理起小物现实加量都两体制机当使点从业本去把性好应开它合还因由其些然前外天政四日那社义事平形相全表间样与关各重新线内数正心反你明看原又么利比或但质气第向道命此变条只没结解问意建月公无系军很情者最立代想已通并提直题党程展五果料象员";

const ENGLISH_WORDS: [&str; 10] = [
    "GPT", "AI", "CPU", "OK", "Python", "API", "cloud", "token", "model", "data",
];

const TERMINALS: [char; 3] = ['。', '？', '！'];

fn pick_char(rng: &mut ChaCha8Rng, pool: &[char]) -> char {
    pool[rng.random_range(0..pool.len())]
}

fn terminal(rng: &mut ChaCha8Rng) -> char {
    // Mostly 。 with occasional ？/！, like transcribed speech.
    let roll: f64 = rng.random();
    if roll < 0.8 {
        TERMINALS[0]
    } else if roll < 0.9 {
        TERMINALS[1]
    } else {
        TERMINALS[2]
    }
}

/// Append one content token to `out`. English words and numbers are padded
/// with spaces so neighbouring tokens never fuse into one.
fn push_content_token(rng: &mut ChaCha8Rng, pool: &[char], out: &mut String, allow_comma: bool) {
    let roll: f64 = rng.random();
    if roll < 0.06 {
        out.push(' ');
        out.push_str(ENGLISH_WORDS[rng.random_range(0..ENGLISH_WORDS.len())]);
        out.push(' ');
    } else if roll < 0.12 {
        let digits = rng.random_range(1..=4);
        out.push(' ');
        for _ in 0..digits {
            out.push(char::from(b'0' + rng.random_range(0..10u8)));
        }
        out.push(' ');
    } else if roll < 0.18 && allow_comma {
        out.push('，');
    } else {
        out.push(pick_char(rng, pool));
    }
}

/// One sentence with `tokens` total tokens, terminal included.
fn push_sentence(rng: &mut ChaCha8Rng, pool: &[char], out: &mut String, tokens: usize) {
    debug_assert!(tokens >= 1);
    for k in 0..tokens.saturating_sub(1) {
        // No comma right at the start or end of the sentence body.
        let allow_comma = k > 0 && k + 2 < tokens;
        push_content_token(rng, pool, out, allow_comma);
    }
    if tokens >= 2 {
        out.push(terminal(rng));
    } else {
        out.push(pick_char(rng, pool));
    }
}

/// A clean text tokenizing to exactly `n_tokens` tokens (useful when a test
/// needs a known denominator). Ends on a terminal except when the budget
/// forces a one-token trailing fragment.
pub fn clean_text_with_tokens(n_tokens: usize, seed: u64) -> String {
    let pool: Vec<char> = SENTENCE_CHARS.chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    let mut produced = 0;
    while produced < n_tokens {
        let remaining = n_tokens - produced;
        let take = remaining.min(rng.random_range(4..=12));
        push_sentence(&mut rng, &pool, &mut out, take);
        produced += take;
    }
    out
}

/// Generate `count` clean documents (reference == hypothesis), each seeded
/// from `(seed, id)` so any subset regenerates identically.
pub fn generate_clean_documents(count: usize, seed: u64) -> Vec<Document> {
    let pool: Vec<char> = SENTENCE_CHARS.chars().collect();
    (0..count)
        .map(|i| {
            let id = format!("doc-{i:04}");
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &id));
            let mut text = String::new();
            let n_sentences = rng.random_range(3..=12);
            for _ in 0..n_sentences {
                let tokens = rng.random_range(5..=15);
                push_sentence(&mut rng, &pool, &mut text, tokens);
            }
            if rng.random_bool(0.2) {
                // Trailing unterminated fragment, as in cut-off recordings.
                for _ in 0..rng.random_range(2..=5) {
                    text.push(pick_char(&mut rng, &pool));
                }
            }
            Document {
                id,
                hyp_text: text.clone(),
                ref_text: Some(text),
                vad_segments: None,
            }
        })
        .collect()
}
