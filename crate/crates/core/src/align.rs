//! Minimal-edit alignment between token sequences, error rates (overall and
//! per category), and the boundary projection that segmentation relies on.
//!
//! ER = (S + D + I) / N with N the reference token count; ERR is the signed
//! relative change of one ER against a baseline ER. Alignments are unit-cost
//! Levenshtein with a deterministic backtrace.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textproc::{Token, TokenCategory};

/// One step of an alignment. Match/Substitute consume a token from both
/// sequences, Delete only from the reference, Insert only from the
/// hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EditOp {
    Match { ref_index: usize, hyp_index: usize },
    Substitute { ref_index: usize, hyp_index: usize },
    Delete { ref_index: usize },
    Insert { hyp_index: usize },
}

/// A minimum-cost alignment plus its operation counts.
///
/// Invariants: `s_count + d_count + i_count` is the Levenshtein distance;
/// `s_count + d_count + match_count == |ref|` and
/// `s_count + i_count + match_count == |hyp|`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub ops: Vec<EditOp>,
    pub s_count: usize,
    pub d_count: usize,
    pub i_count: usize,
    pub match_count: usize,
}

impl Alignment {
    /// Total edit distance realized by this alignment.
    pub fn distance(&self) -> usize {
        self.s_count + self.d_count + self.i_count
    }
}

// Backtrace cell tags for the DP matrix.
const BT_MATCH: u8 = 1;
const BT_SUB: u8 = 2;
const BT_DEL: u8 = 3;
const BT_INS: u8 = 4;

/// Align two token sequences with unit costs for substitution, deletion and
/// insertion. Two tokens match only if their surfaces are byte-identical
/// (case-sensitive).
///
/// When costs tie the backtrace prefers Match > Substitute > Delete >
/// Insert, so the op sequence is deterministic. Memory is
/// `(|ref|+1) × (|hyp|+1)` bytes for the backtrace; callers chunk long
/// documents at segment level.
pub fn align(ref_tokens: &[Token], hyp_tokens: &[Token]) -> Alignment {
    let n = ref_tokens.len();
    let m = hyp_tokens.len();
    let width = m + 1;
    let mut backtrace = vec![0u8; (n + 1) * width];
    let mut prev: Vec<usize> = (0..=m).collect();
    let mut curr: Vec<usize> = vec![0; m + 1];

    for cell in backtrace.iter_mut().take(m + 1).skip(1) {
        *cell = BT_INS;
    }
    for i in 1..=n {
        curr[0] = i;
        backtrace[i * width] = BT_DEL;
        for j in 1..=m {
            let is_match = ref_tokens[i - 1].surface == hyp_tokens[j - 1].surface;
            let diag = prev[j - 1] + if is_match { 0 } else { 1 };
            let up = prev[j] + 1;
            let left = curr[j - 1] + 1;
            // Tie-break priority: Match > Substitute > Delete > Insert.
            let mut best = diag;
            let mut tag = if is_match { BT_MATCH } else { BT_SUB };
            if up < best {
                best = up;
                tag = BT_DEL;
            }
            if left < best {
                best = left;
                tag = BT_INS;
            }
            curr[j] = best;
            backtrace[i * width + j] = tag;
        }
        std::mem::swap(&mut prev, &mut curr);
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        match backtrace[i * width + j] {
            BT_MATCH => {
                i -= 1;
                j -= 1;
                ops.push(EditOp::Match {
                    ref_index: i,
                    hyp_index: j,
                });
            }
            BT_SUB => {
                i -= 1;
                j -= 1;
                ops.push(EditOp::Substitute {
                    ref_index: i,
                    hyp_index: j,
                });
            }
            BT_DEL => {
                i -= 1;
                ops.push(EditOp::Delete { ref_index: i });
            }
            BT_INS => {
                j -= 1;
                ops.push(EditOp::Insert { hyp_index: j });
            }
            tag => unreachable!("corrupt backtrace tag {tag} at ({i},{j})"),
        }
    }
    ops.reverse();

    let (mut s, mut d, mut ins, mut mat) = (0, 0, 0, 0);
    for op in &ops {
        match op {
            EditOp::Match { .. } => mat += 1,
            EditOp::Substitute { .. } => s += 1,
            EditOp::Delete { .. } => d += 1,
            EditOp::Insert { .. } => ins += 1,
        }
    }
    Alignment {
        ops,
        s_count: s,
        d_count: d,
        i_count: ins,
        match_count: mat,
    }
}

/// Edit distance between two token sequences (cost only, two-row DP).
pub fn edit_distance(ref_tokens: &[Token], hyp_tokens: &[Token]) -> usize {
    let m = hyp_tokens.len();
    let mut prev: Vec<usize> = (0..=m).collect();
    let mut curr: Vec<usize> = vec![0; m + 1];
    for (i, rt) in ref_tokens.iter().enumerate() {
        curr[0] = i + 1;
        for (j, ht) in hyp_tokens.iter().enumerate() {
            let diag = prev[j] + usize::from(rt.surface != ht.surface);
            curr[j + 1] = diag.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[m]
}

/// Error rate (S+D+I)/N with N the reference token count.
///
/// An empty reference yields 0.0 against an empty hypothesis and the +∞
/// sentinel against a non-empty one (every insertion is an error with no
/// reference mass to divide by).
pub fn error_rate(ref_tokens: &[Token], hyp_tokens: &[Token]) -> f64 {
    if ref_tokens.is_empty() {
        return if hyp_tokens.is_empty() {
            0.0
        } else {
            f64::INFINITY
        };
    }
    edit_distance(ref_tokens, hyp_tokens) as f64 / ref_tokens.len() as f64
}

/// ERR is undefined when the baseline error rate is not positive.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("relative error-rate reduction is undefined for baseline ER {baseline}")]
pub struct UndefinedErr {
    pub baseline: f64,
}

/// Relative error-rate reduction: (corrected − baseline) / baseline.
/// Negative values mean the correction improved on the baseline.
pub fn err(er_corrected: f64, er_baseline: f64) -> Result<f64, UndefinedErr> {
    if er_baseline <= 0.0 {
        return Err(UndefinedErr {
            baseline: er_baseline,
        });
    }
    Ok((er_corrected - er_baseline) / er_baseline)
}

/// Error counts and rate for one token category (or for Overall).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub er: f64,
    /// Relative reduction vs. a baseline report; absent until
    /// [`MetricReport::with_baseline`] fills it in, or when the baseline ER
    /// is zero.
    pub err: Option<f64>,
    pub n_ref: usize,
    pub s: usize,
    pub d: usize,
    pub i: usize,
}

impl CategoryMetrics {
    fn from_counts(n_ref: usize, s: usize, d: usize, i: usize) -> Self {
        let errors = s + d + i;
        let er = if n_ref > 0 {
            errors as f64 / n_ref as f64
        } else if errors == 0 {
            0.0
        } else {
            f64::INFINITY
        };
        CategoryMetrics {
            er,
            err: None,
            n_ref,
            s,
            d,
            i,
        }
    }
}

/// Decomposed error rates mirroring one evaluation-table row: one entry per
/// token category plus the aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mandarin: CategoryMetrics,
    pub punctuation: CategoryMetrics,
    pub itn: CategoryMetrics,
    pub cs_english: CategoryMetrics,
    pub overall: CategoryMetrics,
}

impl MetricReport {
    pub fn category(&self, category: TokenCategory) -> &CategoryMetrics {
        match category {
            TokenCategory::Mandarin => &self.mandarin,
            TokenCategory::Punctuation => &self.punctuation,
            TokenCategory::Itn => &self.itn,
            TokenCategory::CsEnglish => &self.cs_english,
        }
    }

    /// A copy of this report with each category's `err` computed against the
    /// matching category of `baseline`. Categories whose baseline ER is zero
    /// (or non-finite) keep `err == None`.
    pub fn with_baseline(&self, baseline: &MetricReport) -> MetricReport {
        let fill = |ours: &CategoryMetrics, base: &CategoryMetrics| CategoryMetrics {
            err: if base.er.is_finite() {
                err(ours.er, base.er).ok()
            } else {
                None
            },
            ..*ours
        };
        MetricReport {
            mandarin: fill(&self.mandarin, &baseline.mandarin),
            punctuation: fill(&self.punctuation, &baseline.punctuation),
            itn: fill(&self.itn, &baseline.itn),
            cs_english: fill(&self.cs_english, &baseline.cs_english),
            overall: fill(&self.overall, &baseline.overall),
        }
    }
}

/// Per-category error rates for one reference/hypothesis pair.
///
/// Runs `align` once; each Substitute or Delete is attributed to the
/// reference token's category, each Insert to the inserted hypothesis
/// token's category. `n_ref` stays reference-derived, so a category flooded
/// with insertions can exceed ER 1.0.
pub fn categorized_report(ref_tokens: &[Token], hyp_tokens: &[Token]) -> MetricReport {
    let mut acc = ReportAccumulator::new();
    acc.add_alignment(ref_tokens, hyp_tokens, &align(ref_tokens, hyp_tokens));
    acc.finalize()
}

/// Integer-count accumulator behind [`MetricReport`].
///
/// Sums per-category n_ref/S/D/I over any number of alignments and divides
/// once in [`finalize`](Self::finalize). Corpus-level reports built this way
/// are bit-identical no matter how the documents were batched.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReportAccumulator {
    n_ref: [usize; 4],
    s: [usize; 4],
    d: [usize; 4],
    i: [usize; 4],
}

#[inline]
fn slot(category: TokenCategory) -> usize {
    match category {
        TokenCategory::Mandarin => 0,
        TokenCategory::CsEnglish => 1,
        TokenCategory::Itn => 2,
        TokenCategory::Punctuation => 3,
    }
}

impl ReportAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fold in one aligned pair. `alignment` must have been produced from
    /// exactly these token slices.
    pub fn add_alignment(
        &mut self,
        ref_tokens: &[Token],
        hyp_tokens: &[Token],
        alignment: &Alignment,
    ) {
        for t in ref_tokens {
            self.n_ref[slot(t.category)] += 1;
        }
        for op in &alignment.ops {
            match *op {
                EditOp::Match { .. } => {}
                EditOp::Substitute { ref_index, .. } => {
                    self.s[slot(ref_tokens[ref_index].category)] += 1;
                }
                EditOp::Delete { ref_index } => {
                    self.d[slot(ref_tokens[ref_index].category)] += 1;
                }
                EditOp::Insert { hyp_index } => {
                    self.i[slot(hyp_tokens[hyp_index].category)] += 1;
                }
            }
        }
    }

    /// Fold in a pair of texts, tokenizing and aligning them.
    pub fn add_pair(&mut self, ref_text: &str, hyp_text: &str) {
        let r = crate::textproc::tokenize(ref_text);
        let h = crate::textproc::tokenize(hyp_text);
        let alignment = align(&r, &h);
        self.add_alignment(&r, &h, &alignment);
    }

    /// Merge another accumulator's counts into this one.
    pub fn merge(&mut self, other: &ReportAccumulator) {
        for k in 0..4 {
            self.n_ref[k] += other.n_ref[k];
            self.s[k] += other.s[k];
            self.d[k] += other.d[k];
            self.i[k] += other.i[k];
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == ReportAccumulator::default()
    }

    pub fn finalize(&self) -> MetricReport {
        let cat = |c: TokenCategory| {
            let k = slot(c);
            CategoryMetrics::from_counts(self.n_ref[k], self.s[k], self.d[k], self.i[k])
        };
        let overall = CategoryMetrics::from_counts(
            self.n_ref.iter().sum(),
            self.s.iter().sum(),
            self.d.iter().sum(),
            self.i.iter().sum(),
        );
        MetricReport {
            mandarin: cat(TokenCategory::Mandarin),
            punctuation: cat(TokenCategory::Punctuation),
            itn: cat(TokenCategory::Itn),
            cs_english: cat(TokenCategory::CsEnglish),
            overall,
        }
    }
}

/// Project a hypothesis token boundary onto the reference through an
/// alignment.
///
/// Returns the smallest reference index `r` such that every op consuming a
/// hyp token with index < `hyp_boundary` consumes only ref tokens with index
/// < `r`. Delete ops sitting between two hypothesis tokens attach to the
/// earlier side. Monotone nondecreasing in the boundary; 0 maps to 0 and
/// `|hyp|` maps to `|ref|`.
pub fn project_boundary(alignment: &Alignment, hyp_boundary: usize) -> usize {
    if hyp_boundary == 0 {
        return 0;
    }
    let mut consumed_hyp = 0;
    let mut consumed_ref = 0;
    for op in &alignment.ops {
        match op {
            EditOp::Delete { .. } => consumed_ref += 1,
            EditOp::Match { .. } | EditOp::Substitute { .. } => {
                if consumed_hyp == hyp_boundary {
                    break;
                }
                consumed_hyp += 1;
                consumed_ref += 1;
            }
            EditOp::Insert { .. } => {
                if consumed_hyp == hyp_boundary {
                    break;
                }
                consumed_hyp += 1;
            }
        }
    }
    consumed_ref
}
