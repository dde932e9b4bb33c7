//! Acceptance suite: one test per release gate. Each prints a `[PASS]`
//! line with the measured result (visible with `-- --nocapture`); a failed
//! gate fails its test. Gate 9 needs an external dataset and reports
//! instead of failing — see its doc comment.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use coc_core::corpus::synth;
use coc_core::textproc::is_cjk;
use coc_core::{
    align, build_conversation, edit_distance, err, estimate_session_tokens, estimate_tokens,
    export_training_chats, load_corpus, run_batch, segmentize, simulate_corpus, split_sentences,
    to_pinyin, BatchOptions, Conversation, Document, EngineConfig, GuidanceMode, IdentityMock,
    MetricReport, NoiseProfile, OracleMock, PinyinTable, PrepareOptions, RecordingClient,
    ReplayClient, ReportAccumulator, Role, Token, TokenCategory, DEFAULT_INSTRUCTION,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ------------------------------------------------------------ shared bits

/// A realistic ASR-style corpus: synthetic clean articles pushed through a
/// moderate noise profile, references kept.
fn noisy_corpus(count: usize, seed: u64) -> Vec<Document> {
    let clean = synth::generate_clean_documents(count, seed);
    let profile = NoiseProfile {
        sub_rate: 0.12,
        del_rate: 0.04,
        ins_rate: 0.03,
        punct_drop_rate: 0.4,
        number_verbalize_rate: 0.5,
        lowercase_english: true,
        filler_rate: 0.02,
        seed: seed ^ 0x5EED,
    };
    simulate_corpus(&clean, &profile)
}

/// Reference evaluation done directly, bypassing the engine: one
/// accumulator pass over (ref, hyp).
fn direct_report(docs: &[Document]) -> MetricReport {
    let mut acc = ReportAccumulator::new();
    for doc in docs {
        acc.add_pair(
            doc.ref_text.as_deref().expect("corpus has refs"),
            &doc.hyp_text,
        );
    }
    acc.finalize()
}

fn assert_reports_bit_equal(a: &MetricReport, b: &MetricReport) {
    let rows = [
        ("mandarin", &a.mandarin, &b.mandarin),
        ("punctuation", &a.punctuation, &b.punctuation),
        ("itn", &a.itn, &b.itn),
        ("cs_english", &a.cs_english, &b.cs_english),
        ("overall", &a.overall, &b.overall),
    ];
    for (name, x, y) in rows {
        assert_eq!(
            x.er.to_bits(),
            y.er.to_bits(),
            "{name} ER must be bit-identical ({} vs {})",
            x.er,
            y.er
        );
        assert_eq!(
            (x.n_ref, x.s, x.d, x.i),
            (y.n_ref, y.s, y.d, y.i),
            "{name} counts must agree"
        );
    }
}

// ------------------------------------------------------------- criterion 1

/// Plain recursive edit distance over abstract symbols: the textbook
/// definition, no tables, no backtrace — an implementation independent of
/// the production alignment.
fn recursive_distance(r: &[usize], h: &[usize]) -> usize {
    match (r.split_first(), h.split_first()) {
        (None, None) => 0,
        (None, Some((_, h_tail))) => 1 + recursive_distance(r, h_tail),
        (Some((_, r_tail)), None) => 1 + recursive_distance(r_tail, h),
        (Some((r_head, r_tail)), Some((h_head, h_tail))) => {
            let substitute = recursive_distance(r_tail, h_tail) + usize::from(r_head != h_head);
            let delete = recursive_distance(r_tail, h) + 1;
            let insert = recursive_distance(r, h_tail) + 1;
            substitute.min(delete).min(insert)
        }
    }
}

#[test]
fn criterion_01_alignment_matches_a_recursive_oracle() {
    let started = Instant::now();
    let alphabet = ['甲', '乙', '丙', '丁'];
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0001);
    let to_tokens = |ids: &[usize]| -> Vec<Token> {
        ids.iter()
            .enumerate()
            .map(|(i, &a)| Token::new(alphabet[a].to_string(), TokenCategory::Mandarin, i))
            .collect()
    };

    let pairs = 600;
    for _ in 0..pairs {
        let r_ids: Vec<usize> = (0..rng.random_range(0..=8))
            .map(|_| rng.random_range(0..alphabet.len()))
            .collect();
        let h_ids: Vec<usize> = (0..rng.random_range(0..=8))
            .map(|_| rng.random_range(0..alphabet.len()))
            .collect();
        let r = to_tokens(&r_ids);
        let h = to_tokens(&h_ids);
        let expected = recursive_distance(&r_ids, &h_ids);
        let alignment = align(&r, &h);
        assert_eq!(
            alignment.distance(),
            expected,
            "alignment distance for ref {r_ids:?} vs hyp {h_ids:?}"
        );
        assert_eq!(edit_distance(&r, &h), expected, "cost-only distance");
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed < Duration::from_secs(10),
        "oracle comparison took {elapsed:?}, budget is 10s"
    );
    println!(
        "[PASS] criterion 1: alignment matched the recursive oracle on {pairs} random pairs in {elapsed:?}"
    );
}

// ------------------------------------------------------------- criterion 2

#[test]
fn criterion_02_relative_reduction_reference_points() {
    // Published correction results: 12.61% → 7.03% and 5.97% → 4.19%.
    let full = err(7.03, 12.61).expect("baseline is positive");
    assert!(
        (full - (-0.4425)).abs() <= 0.0002,
        "err(7.03, 12.61) = {full}, want −0.4425 ± 0.0002"
    );
    let homo = err(4.19, 5.97).expect("baseline is positive");
    assert!(
        (homo - (-0.2982)).abs() <= 0.0002,
        "err(4.19, 5.97) = {homo}, want −0.2982 ± 0.0002"
    );
    println!(
        "[PASS] criterion 2: err reproduces −44.25% ({:.4}) and −29.82% ({:.4})",
        full * 100.0,
        homo * 100.0
    );
}

// ------------------------------------------------------------- criterion 3

#[test]
fn criterion_03_segmentation_round_trips_on_1000_documents() {
    let mut total_docs = 0usize;
    let mut total_segments = 0usize;
    for corpus_seed in [1u64, 2, 3, 4] {
        let docs = noisy_corpus(250, corpus_seed);
        let split_seed = corpus_seed.wrapping_mul(31).wrapping_add(7);
        for doc in &docs {
            let segments = segmentize(doc, 5, split_seed).expect("segmentize");
            let hyp_concat: String = segments.iter().map(|s| s.hyp_segment.as_str()).collect();
            assert_eq!(
                hyp_concat, doc.hyp_text,
                "hypothesis concatenation must reproduce document {}",
                doc.id
            );
            let ref_concat: String = segments
                .iter()
                .map(|s| s.ref_segment.as_deref().expect("refs present"))
                .collect();
            assert_eq!(
                ref_concat,
                doc.ref_text.as_deref().unwrap(),
                "reference concatenation must reproduce document {}",
                doc.id
            );
            for segment in &segments {
                assert!(
                    (1..=5).contains(&segment.sentence_count),
                    "segment {} of {} groups {} sentences",
                    segment.index,
                    doc.id,
                    segment.sentence_count
                );
                assert!(!segment.hyp_segment.is_empty());
            }
            total_segments += segments.len();
            total_docs += 1;
        }
    }
    assert_eq!(total_docs, 1000);
    println!(
        "[PASS] criterion 3: {total_docs} documents round-tripped through segmentation ({total_segments} segments, all 1–5 sentences)"
    );
}

// ------------------------------------------------------------- criterion 4

#[test]
fn criterion_04_identity_end_to_end_on_100_documents() {
    let docs = noisy_corpus(100, 41);
    let outcome = run_batch(
        &docs,
        &IdentityMock,
        &EngineConfig::default(),
        &BatchOptions::default(),
        PinyinTable::builtin(),
    )
    .expect("config is valid");
    assert!(outcome.failures.is_empty(), "identity run cannot fail");
    assert_eq!(outcome.sessions.len(), docs.len());
    for (session, doc) in outcome.sessions.iter().zip(&docs) {
        assert_eq!(
            session.corrected_text, doc.hyp_text,
            "identity output must be byte-equal to the hypothesis of {}",
            doc.id
        );
    }
    let report = outcome.report.expect("corpus carries references");
    assert_reports_bit_equal(&report, &direct_report(&docs));
    println!(
        "[PASS] criterion 4: identity run echoed {}/{} documents; aggregate ER bit-equal to direct evaluation",
        docs.len(),
        docs.len()
    );
}

// ------------------------------------------------------------- criterion 5

/// Swap the first CJK character of every sentence (falling back to the
/// terminal mark), so each sentence — and therefore each segment — differs
/// from the clean text by at least one token.
fn perturb_every_sentence(text: &str) -> String {
    let mut out = String::new();
    for sentence in split_sentences(text) {
        let mut chars: Vec<char> = sentence.text.chars().collect();
        if let Some(pos) = chars.iter().position(|&c| is_cjk(c)) {
            chars[pos] = if chars[pos] == '错' { '误' } else { '错' };
        } else if let Some(last) = chars.last_mut() {
            *last = if *last == '。' { '？' } else { '。' };
        }
        out.extend(chars);
    }
    out
}

/// Corpus where every segment's gate error rate is strictly positive.
fn per_sentence_erroneous_corpus(count: usize, seed: u64) -> Vec<Document> {
    synth::generate_clean_documents(count, seed)
        .into_iter()
        .map(|doc| {
            let clean = doc.ref_text.clone().expect("synthetic docs carry refs");
            Document {
                id: doc.id,
                hyp_text: perturb_every_sentence(&clean),
                ref_text: Some(clean),
                vad_segments: None,
            }
        })
        .collect()
}

#[test]
fn criterion_05_oracle_limits() {
    let docs = per_sentence_erroneous_corpus(60, 17);
    for doc in &docs {
        assert_ne!(
            Some(&doc.hyp_text),
            doc.ref_text.as_ref(),
            "every document must carry errors"
        );
    }

    // Loose gate: every reference segment is accepted, zero error remains.
    let loose = EngineConfig {
        threshold: 10.0,
        ..EngineConfig::default()
    };
    let outcome = run_batch(
        &docs,
        &OracleMock,
        &loose,
        &BatchOptions::default(),
        PinyinTable::builtin(),
    )
    .unwrap();
    assert!(outcome.failures.is_empty());
    let report = outcome.report.expect("refs present");
    assert_eq!(
        report.overall.er.to_bits(),
        0f64.to_bits(),
        "loose oracle must reach Overall ER 0 exactly, got {}",
        report.overall.er
    );

    // Tight gate: every corrected segment overshoots 1e-9, all rejected.
    let tight = EngineConfig {
        threshold: 1e-9,
        ..EngineConfig::default()
    };
    let outcome = run_batch(
        &docs,
        &OracleMock,
        &tight,
        &BatchOptions::default(),
        PinyinTable::builtin(),
    )
    .unwrap();
    assert!(outcome.failures.is_empty());
    for (session, doc) in outcome.sessions.iter().zip(&docs) {
        for decision in &session.decisions {
            assert!(
                decision.gate_er > 0.0,
                "segment {} of {} must have a positive gate error rate",
                decision.index,
                doc.id
            );
            assert!(!decision.accepted);
        }
        assert_eq!(
            session.corrected_text, doc.hyp_text,
            "rejected corrections must leave {} untouched",
            doc.id
        );
    }
    let report = outcome.report.expect("refs present");
    let baseline = outcome.baseline_report.expect("refs present");
    assert_reports_bit_equal(&report, &baseline);
    println!(
        "[PASS] criterion 5: oracle at threshold 10.0 → Overall ER 0 exactly; at 1e-9 all corrections rejected, output == hypothesis"
    );
}

// ------------------------------------------------------------- criterion 6

#[test]
fn criterion_06_threshold_monotonicity_over_a_replay_transcript() {
    let docs = noisy_corpus(40, 23);
    let batch = BatchOptions::default();
    let loose = EngineConfig {
        threshold: 10.0,
        ..EngineConfig::default()
    };
    let recorder = RecordingClient::new(OracleMock);
    let recorded = run_batch(&docs, &recorder, &loose, &batch, PinyinTable::builtin()).unwrap();
    assert!(recorded.failures.is_empty());
    let replay = ReplayClient::from_records(recorder.records());

    let thresholds = [0.2, 0.3, 0.4, 0.5];
    let mut previous: Option<(BTreeSet<(String, usize)>, f64)> = None;
    for threshold in thresholds {
        let cfg = EngineConfig {
            threshold,
            ..EngineConfig::default()
        };
        let outcome = run_batch(&docs, &replay, &cfg, &batch, PinyinTable::builtin()).unwrap();
        assert!(
            outcome.failures.is_empty(),
            "replay must cover every query at threshold {threshold}"
        );
        let accepted: BTreeSet<(String, usize)> = outcome
            .sessions
            .iter()
            .flat_map(|s| {
                s.decisions
                    .iter()
                    .filter(|d| d.accepted)
                    .map(|d| (s.doc_id.clone(), d.index))
            })
            .collect();
        let ratio = outcome.correction_ratio();
        if let Some((previous_accepted, previous_ratio)) = &previous {
            assert!(
                previous_accepted.is_subset(&accepted),
                "accepted segments at a tighter threshold must stay accepted at {threshold}"
            );
            assert!(
                *previous_ratio <= ratio,
                "correction ratio must not decrease ({previous_ratio} → {ratio} at {threshold})"
            );
        }
        previous = Some((accepted, ratio));
    }
    println!(
        "[PASS] criterion 6: accepted sets nested and correction ratio nondecreasing across thresholds {thresholds:?}"
    );
}

// ------------------------------------------------------------- criterion 7

#[test]
fn criterion_07_token_estimates() {
    let text = "天".repeat(6000);
    assert_eq!(
        estimate_tokens(&text),
        4020,
        "6000 chars must estimate 4020 tokens"
    );

    let article = "天".repeat(80_697);
    assert_eq!(article.chars().count(), 80_697);
    let session = estimate_session_tokens(&Document::new("article", article));
    assert!(
        (155_000..=170_000).contains(&session),
        "whole-session estimate {session} outside [155000, 170000]"
    );
    println!(
        "[PASS] criterion 7: 6000 chars → 4020 tokens; 80697-char article session ≈ {session} tokens"
    );
}

// ------------------------------------------------------------- criterion 8

#[test]
fn criterion_08_training_chats_are_well_formed_over_the_whole_corpus() {
    let docs = noisy_corpus(100, 57);
    let options = PrepareOptions {
        max_sentences: 5,
        seed: 13,
        ..PrepareOptions::default()
    };
    let mut buf = Vec::new();
    let written = export_training_chats(&docs, &options, PinyinTable::builtin(), &mut buf).unwrap();
    assert_eq!(written, docs.len());

    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), docs.len());
    for (line, doc) in lines.iter().zip(&docs) {
        let conversation: Conversation = serde_json::from_str(line).expect("line must parse");
        let messages = conversation.messages();
        let segments = segmentize(doc, options.max_sentences, options.seed).unwrap();
        assert_eq!(
            messages.len(),
            2 * segments.len(),
            "{} must hold exactly two messages per segment",
            doc.id
        );
        for (i, message) in messages.iter().enumerate() {
            let expected = if i % 2 == 0 {
                Role::User
            } else {
                Role::Assistant
            };
            assert_eq!(
                message.role, expected,
                "message {i} of {} out of order",
                doc.id
            );
            assert!(!message.content.is_empty());
        }
        assert!(
            messages[0].content.contains(&doc.hyp_text),
            "opening turn of {} must quote the full pre-recognized text verbatim",
            doc.id
        );
    }
    println!(
        "[PASS] criterion 8: {}/{} conversations well-formed (2×segments messages, strict alternation, full text in the opening turn)",
        docs.len(),
        docs.len()
    );
}

// ------------------------------------------------------------- criterion 9

/// Soft gate: scoring the ChFT homogeneous test set's raw hypotheses needs
/// the dataset on disk. Point `COC_CHFT_CORPUS` at a corpus JSONL
/// (`{"id", "hyp", "ref"}` per line) to run it; the published Overall
/// baseline is 12.61%, and anything within ±1.5 absolute counts as a
/// reproduction. Deviations are reported, not failed, because the
/// published category conventions leave room for interpretation.
#[test]
fn criterion_09_dataset_baseline_reproduction_soft() {
    let Some(path) = std::env::var_os("COC_CHFT_CORPUS") else {
        println!(
            "[SKIP] criterion 9: set COC_CHFT_CORPUS to a ChFT homogeneous-test corpus JSONL to score the recognition baseline"
        );
        return;
    };
    let path = PathBuf::from(path);
    let docs = match load_corpus(&path) {
        Ok(docs) => docs,
        Err(error) => {
            println!(
                "[REPORT] criterion 9: cannot load {}: {error}",
                path.display()
            );
            return;
        }
    };
    let mut acc = ReportAccumulator::new();
    let mut scored = 0usize;
    for doc in &docs {
        if let Some(ref_text) = &doc.ref_text {
            acc.add_pair(ref_text, &doc.hyp_text);
            scored += 1;
        }
    }
    if acc.is_empty() {
        println!(
            "[REPORT] criterion 9: no documents with references in {}",
            path.display()
        );
        return;
    }
    let overall = acc.finalize().overall.er * 100.0;
    let delta = overall - 12.61;
    if delta.abs() <= 1.5 {
        println!(
            "[PASS] criterion 9: baseline Overall ER {overall:.2}% within ±1.5 of 12.61% over {scored} documents"
        );
    } else {
        println!(
            "[REPORT] criterion 9: baseline Overall ER {overall:.2}% deviates {delta:+.2} from 12.61% over {scored} documents"
        );
    }
}

// ------------------------------------------------------------ criterion 10

#[test]
fn criterion_10_pinyin_guidance_plumbing() {
    // Rendering: the canonical greeting becomes numbered-pinyin guidance.
    let greeting = Document::new("greeting", "你好。");
    let segments = segmentize(&greeting, 5, 0).unwrap();
    assert_eq!(segments.len(), 1);
    let plan = build_conversation(
        &greeting.hyp_text,
        &segments,
        GuidanceMode::Pinyin,
        DEFAULT_INSTRUCTION,
        PinyinTable::builtin(),
    )
    .unwrap();
    assert_eq!(to_pinyin("你好。", PinyinTable::builtin()), "ni3 hao3 。");
    assert!(
        plan.user_turns[0].ends_with("\n\nni3 hao3 。"),
        "opening turn must end with the pinyin guidance, was {:?}",
        plan.user_turns[0]
    );

    // Behaviour: pinyin guidance must leave gating and emission untouched,
    // so the identity and oracle gates replay exactly.
    let pinyin_cfg = |threshold: f64| EngineConfig {
        guidance: GuidanceMode::Pinyin,
        threshold,
        ..EngineConfig::default()
    };
    let batch = BatchOptions::default();
    let table = PinyinTable::builtin();

    let docs = noisy_corpus(100, 41);
    let outcome = run_batch(&docs, &IdentityMock, &pinyin_cfg(0.3), &batch, table).unwrap();
    assert!(outcome.failures.is_empty());
    for (session, doc) in outcome.sessions.iter().zip(&docs) {
        assert_eq!(session.corrected_text, doc.hyp_text);
    }
    assert_reports_bit_equal(
        &outcome.report.expect("refs present"),
        &direct_report(&docs),
    );

    let erroneous = per_sentence_erroneous_corpus(60, 17);
    let outcome = run_batch(&erroneous, &OracleMock, &pinyin_cfg(10.0), &batch, table).unwrap();
    assert!(outcome.failures.is_empty());
    assert_eq!(
        outcome.report.expect("refs present").overall.er.to_bits(),
        0f64.to_bits()
    );

    let outcome = run_batch(&erroneous, &OracleMock, &pinyin_cfg(1e-9), &batch, table).unwrap();
    assert!(outcome.failures.is_empty());
    for (session, doc) in outcome.sessions.iter().zip(&erroneous) {
        assert_eq!(session.corrected_text, doc.hyp_text);
    }

    println!(
        "[PASS] criterion 10: pinyin guidance rendered \"ni3 hao3 。\" and left identity/oracle gate behavior unchanged"
    );
}
