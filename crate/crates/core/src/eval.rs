//! Scoring of recognizer hypotheses against a reference corpus.
//!
//! Words are aligned with unit-cost Levenshtein alignment. WER counts all
//! edit operations; WDER looks only at correctly recognized words and asks
//! whether their speaker role is right. Category scores measure how well
//! words from a lexicon (numbers, dates, names) survive recognition.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize_token, Conversation, SpeakerRole};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("speaker sequence has {found} entries, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("lexicon {0} is empty")]
    EmptyLexicon(String),
    #[error("no hypothesis for conversation {conversation}, turn {turn}")]
    MissingHypothesis { conversation: String, turn: usize },
    #[error("{path}: {message}")]
    Input { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum EditOp {
    Match { r: usize, h: usize },
    Substitute { r: usize, h: usize },
    Delete { r: usize },
    Insert { h: usize },
}

impl EditOp {
    pub fn cost(&self) -> usize {
        match self {
            EditOp::Match { .. } => 0,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub matches: usize,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

impl OpCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

/// Ordered edit operations turning the reference into the hypothesis.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentOps {
    pub ops: Vec<EditOp>,
}

impl AlignmentOps {
    pub fn cost(&self) -> usize {
        self.ops.iter().map(EditOp::cost).sum()
    }

    pub fn counts(&self) -> OpCounts {
        let mut c = OpCounts::default();
        for op in &self.ops {
            match op {
                EditOp::Match { .. } => c.matches += 1,
                EditOp::Substitute { .. } => c.substitutions += 1,
                EditOp::Delete { .. } => c.deletions += 1,
                EditOp::Insert { .. } => c.insertions += 1,
            }
        }
        c
    }

    pub fn ref_len(&self) -> usize {
        self.ops.iter().filter(|op| !matches!(op, EditOp::Insert { .. })).count()
    }

    pub fn hyp_len(&self) -> usize {
        self.ops.iter().filter(|op| !matches!(op, EditOp::Delete { .. })).count()
    }

    /// Alignment of hypothesis against reference: deletions become
    /// insertions and vice versa.
    pub fn transposed(&self) -> AlignmentOps {
        AlignmentOps {
            ops: self
                .ops
                .iter()
                .map(|op| match *op {
                    EditOp::Match { r, h } => EditOp::Match { r: h, h: r },
                    EditOp::Substitute { r, h } => EditOp::Substitute { r: h, h: r },
                    EditOp::Delete { r } => EditOp::Insert { h: r },
                    EditOp::Insert { h } => EditOp::Delete { r: h },
                })
                .collect(),
        }
    }
}

/// Minimal-cost alignment. Among equal-cost choices the traceback prefers
/// Match, then Substitute, then Delete, then Insert.
pub fn align<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> AlignmentOps {
    let (n, m) = (reference.len(), hypothesis.len());
    let w = m + 1;
    let mut d = vec![0u32; (n + 1) * w];
    for (j, cell) in d[..w].iter_mut().enumerate() {
        *cell = j as u32;
    }
    for i in 1..=n {
        d[i * w] = i as u32;
        for j in 1..=m {
            let diag = d[(i - 1) * w + j - 1] + u32::from(reference[i - 1] != hypothesis[j - 1]);
            let del = d[(i - 1) * w + j] + 1;
            let ins = d[i * w + j - 1] + 1;
            d[i * w + j] = diag.min(del).min(ins);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let diag = d[(i - 1) * w + j - 1];
            if reference[i - 1] == hypothesis[j - 1] && diag == here {
                ops.push(EditOp::Match { r: i - 1, h: j - 1 });
                i -= 1;
                j -= 1;
                continue;
            }
            if reference[i - 1] != hypothesis[j - 1] && diag + 1 == here {
                ops.push(EditOp::Substitute { r: i - 1, h: j - 1 });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * w + j] + 1 == here {
            ops.push(EditOp::Delete { r: i - 1 });
            i -= 1;
        } else {
            ops.push(EditOp::Insert { h: j - 1 });
            j -= 1;
        }
    }
    ops.reverse();
    AlignmentOps { ops }
}

/// (S + D + I) / `ref_len`. An empty reference scores 1.0 against a
/// non-empty hypothesis and 0.0 against an empty one.
pub fn wer(ops: &AlignmentOps, ref_len: usize) -> f64 {
    let errors = ops.counts().errors();
    if ref_len == 0 {
        return if errors == 0 { 0.0 } else { 1.0 };
    }
    errors as f64 / ref_len as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wder {
    pub value: f64,
    pub matched: usize,
    pub wrong_role: usize,
    /// Set when no word was recognized, in which case `value` is 0.
    pub no_matches: bool,
}

/// Fraction of matched words whose hypothesis role differs from the
/// reference role.
pub fn wder(
    ops: &AlignmentOps,
    ref_roles: &[SpeakerRole],
    hyp_roles: &[SpeakerRole],
) -> Result<Wder, EvalError> {
    for (expected, found) in [(ops.ref_len(), ref_roles.len()), (ops.hyp_len(), hyp_roles.len())] {
        if expected != found {
            return Err(EvalError::LengthMismatch { expected, found });
        }
    }
    let (mut matched, mut wrong) = (0, 0);
    for op in &ops.ops {
        if let EditOp::Match { r, h } = *op {
            matched += 1;
            wrong += usize::from(ref_roles[r] != hyp_roles[h]);
        }
    }
    Ok(Wder {
        value: if matched == 0 { 0.0 } else { wrong as f64 / matched as f64 },
        matched,
        wrong_role: wrong,
        no_matches: matched == 0,
    })
}

/// Raw occurrence counts behind a category score, kept so that turns can
/// be pooled before dividing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrfCounts {
    pub ref_total: usize,
    pub hyp_total: usize,
    pub ref_matched: usize,
    pub hyp_matched: usize,
}

impl PrfCounts {
    pub fn add(&mut self, other: &PrfCounts) {
        self.ref_total += other.ref_total;
        self.hyp_total += other.hyp_total;
        self.ref_matched += other.ref_matched;
        self.hyp_matched += other.hyp_matched;
    }

    pub fn score(&self) -> CategoryScore {
        let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        let precision = ratio(self.hyp_matched, self.hyp_total);
        let recall = ratio(self.ref_matched, self.ref_total);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        CategoryScore {
            precision,
            recall,
            f1,
            counts: *self,
        }
    }
}

/// Precision, recall and F1 over one lexicon. With no lexicon words on a
/// side, the corresponding ratio is 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: PrfCounts,
}

pub fn category_counts<W: AsRef<str>>(
    ops: &AlignmentOps,
    reference: &[W],
    hypothesis: &[W],
    lexicon: &BTreeSet<String>,
) -> PrfCounts {
    let hit = |w: &W| lexicon.contains(&normalize_token(w.as_ref()));
    let mut c = PrfCounts {
        ref_total: reference.iter().filter(|w| hit(w)).count(),
        hyp_total: hypothesis.iter().filter(|w| hit(w)).count(),
        ..PrfCounts::default()
    };
    for op in &ops.ops {
        if let EditOp::Match { r, h } = *op {
            c.ref_matched += usize::from(hit(&reference[r]));
            c.hyp_matched += usize::from(hit(&hypothesis[h]));
        }
    }
    c
}

pub fn category_prf<W: AsRef<str>>(
    ops: &AlignmentOps,
    reference: &[W],
    hypothesis: &[W],
    lexicon: &BTreeSet<String>,
) -> Result<CategoryScore, EvalError> {
    if lexicon.is_empty() {
        return Err(EvalError::EmptyLexicon("<inline>".into()));
    }
    Ok(category_counts(ops, reference, hypothesis, lexicon).score())
}

/// Named word lists for category scoring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalLexicons {
    pub categories: BTreeMap<String, BTreeSet<String>>,
}

const BUILTIN_EVAL: &[(&str, &str)] = &[
    ("numbers", include_str!("../data/eval/numbers.txt")),
    ("dates", include_str!("../data/eval/dates.txt")),
    ("names", include_str!("../data/eval/names.txt")),
];

fn parse_word_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(normalize_token)
        .filter(|w| !w.is_empty())
        .collect()
}

impl EvalLexicons {
    pub fn builtin() -> Self {
        Self {
            categories: BUILTIN_EVAL
                .iter()
                .map(|(name, text)| (name.to_string(), parse_word_list(text)))
                .collect(),
        }
    }

    /// Every `*.txt` file in `dir` becomes a lexicon named after its stem.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, EvalError> {
        let dir = dir.as_ref();
        let input = |message: String| EvalError::Input {
            path: dir.display().to_string(),
            message,
        };
        let mut categories = BTreeMap::new();
        for entry in fs::read_dir(dir).map_err(|e| input(e.to_string()))? {
            let path = entry.map_err(|e| input(e.to_string()))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let words = parse_word_list(&fs::read_to_string(&path).map_err(|e| input(e.to_string()))?);
            if words.is_empty() {
                return Err(EvalError::EmptyLexicon(name));
            }
            categories.insert(name, words);
        }
        if categories.is_empty() {
            return Err(input("no .txt lexicons".into()));
        }
        Ok(Self { categories })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypWord {
    pub text: String,
    pub role: SpeakerRole,
}

/// One line of a hypothesis file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypTurn {
    pub conversation: String,
    pub turn: usize,
    pub words: Vec<HypWord>,
}

pub type Hypotheses = HashMap<(String, usize), HypTurn>;

pub fn parse_hypotheses(text: &str) -> Result<Hypotheses, EvalError> {
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let turn: HypTurn = serde_json::from_str(line).map_err(|e| EvalError::Input {
            path: format!("line {}", i + 1),
            message: e.to_string(),
        })?;
        out.insert((turn.conversation.clone(), turn.turn), turn);
    }
    Ok(out)
}

pub fn load_hypotheses(path: impl AsRef<Path>) -> Result<Hypotheses, EvalError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| EvalError::Input {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_hypotheses(&text).map_err(|e| match e {
        EvalError::Input { path: line, message } => EvalError::Input {
            path: format!("{}: {line}", path.display()),
            message,
        },
        other => other,
    })
}

/// The reference corpus as hypotheses: every turn recognized perfectly,
/// with the true roles.
pub fn reference_as_hypotheses(reference: &[Conversation]) -> Hypotheses {
    let mut out = HashMap::new();
    for conv in reference {
        for (ti, turn) in conv.turns.iter().enumerate() {
            out.insert(
                (conv.id.clone(), ti),
                HypTurn {
                    conversation: conv.id.clone(),
                    turn: ti,
                    words: turn
                        .tokens
                        .iter()
                        .map(|t| HypWord {
                            text: t.text.clone(),
                            role: turn.speaker.role,
                        })
                        .collect(),
                },
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub wer: f64,
    pub wder: f64,
    pub wder_no_matches: bool,
    pub ref_words: usize,
    pub ops: OpCounts,
    pub wrong_role: usize,
    pub per_category: BTreeMap<String, CategoryScore>,
    pub band_scores: BTreeMap<String, CategoryScore>,
}

#[derive(Default)]
struct Pooled {
    ref_words: usize,
    ops: OpCounts,
    wrong_role: usize,
    categories: Vec<PrfCounts>,
    bands: Vec<PrfCounts>,
}

impl Pooled {
    fn merge(mut self, other: Pooled) -> Pooled {
        self.ref_words += other.ref_words;
        self.ops.matches += other.ops.matches;
        self.ops.substitutions += other.ops.substitutions;
        self.ops.deletions += other.ops.deletions;
        self.ops.insertions += other.ops.insertions;
        self.wrong_role += other.wrong_role;
        for (dst, src) in [(&mut self.categories, other.categories), (&mut self.bands, other.bands)] {
            if dst.is_empty() {
                *dst = src;
            } else {
                for (a, b) in dst.iter_mut().zip(&src) {
                    a.add(b);
                }
            }
        }
        self
    }
}

/// Scores every reference turn against its hypothesis. Counts are pooled
/// over all turns before any ratio is taken. Words are compared after
/// normalization; empty bands are left out of the report.
pub fn score(
    reference: &[Conversation],
    hypotheses: &Hypotheses,
    lexicons: &EvalLexicons,
    bands: &BTreeMap<String, BTreeSet<String>>,
) -> Result<MetricReport, EvalError> {
    let bands: Vec<(&String, &BTreeSet<String>)> = bands.iter().filter(|(_, s)| !s.is_empty()).collect();
    let turns: Vec<(&Conversation, usize)> = reference
        .iter()
        .flat_map(|c| (0..c.turns.len()).map(move |t| (c, t)))
        .collect();
    let pooled = turns
        .par_iter()
        .map(|&(conv, ti)| -> Result<Pooled, EvalError> {
            let turn = &conv.turns[ti];
            let hyp = hypotheses
                .get(&(conv.id.clone(), ti))
                .ok_or_else(|| EvalError::MissingHypothesis {
                    conversation: conv.id.clone(),
                    turn: ti,
                })?;
            let reference: Vec<String> = turn
                .tokens
                .iter()
                .map(|t| normalize_token(&t.text))
                .filter(|w| !w.is_empty())
                .collect();
            let (hyp_words, hyp_roles): (Vec<String>, Vec<SpeakerRole>) = hyp
                .words
                .iter()
                .map(|w| (normalize_token(&w.text), w.role))
                .filter(|(w, _)| !w.is_empty())
                .unzip();
            let ops = align(&reference, &hyp_words);
            let ref_roles = vec![turn.speaker.role; reference.len()];
            let d = wder(&ops, &ref_roles, &hyp_roles)?;
            Ok(Pooled {
                ref_words: reference.len(),
                ops: ops.counts(),
                wrong_role: d.wrong_role,
                categories: lexicons
                    .categories
                    .values()
                    .map(|lex| category_counts(&ops, &reference, &hyp_words, lex))
                    .collect(),
                bands: bands
                    .iter()
                    .map(|(_, lex)| category_counts(&ops, &reference, &hyp_words, lex))
                    .collect(),
            })
        })
        .try_reduce(Pooled::default, |a, b| Ok(a.merge(b)))?;

    let errors = pooled.ops.errors();
    let wer = match pooled.ref_words {
        0 if errors == 0 => 0.0,
        0 => 1.0,
        n => errors as f64 / n as f64,
    };
    let matched = pooled.ops.matches;
    let fill = |counts: &[PrfCounts], i: usize| counts.get(i).copied().unwrap_or_default().score();
    Ok(MetricReport {
        wer,
        wder: if matched == 0 { 0.0 } else { pooled.wrong_role as f64 / matched as f64 },
        wder_no_matches: matched == 0,
        ref_words: pooled.ref_words,
        ops: pooled.ops,
        wrong_role: pooled.wrong_role,
        per_category: lexicons
            .categories
            .keys()
            .enumerate()
            .map(|(i, name)| (name.clone(), fill(&pooled.categories, i)))
            .collect(),
        band_scores: bands
            .iter()
            .enumerate()
            .map(|(i, (name, _))| ((*name).clone(), fill(&pooled.bands, i)))
            .collect(),
    })
}

/// Plain-text rendering: an error-rate table followed by the F1 table.
pub fn render_table(report: &MetricReport) -> String {
    let mut out = String::new();
    let pct = |v: f64| format!("{:.1}", 100.0 * v);
    let _ = writeln!(out, "{:>8} {:>8}", "WER", "WDER");
    let _ = writeln!(out, "{:>8} {:>8}", pct(report.wer), pct(report.wder));
    if report.wder_no_matches {
        let _ = writeln!(out, "warning: no correctly recognized words, WDER undefined");
    }
    let columns: Vec<(&String, &CategoryScore)> =
        report.per_category.iter().chain(&report.band_scores).collect();
    if !columns.is_empty() {
        let _ = writeln!(out);
        let _ = write!(out, "{:<10}", "");
        for (name, _) in &columns {
            let _ = write!(out, " {name:>8}");
        }
        let _ = writeln!(out);
        for (label, get) in [
            ("precision", (|s: &CategoryScore| s.precision) as fn(&CategoryScore) -> f64),
            ("recall", |s| s.recall),
            ("f1", |s| s.f1),
        ] {
            let _ = write!(out, "{label:<10}");
            for (_, s) in &columns {
                let _ = write!(out, " {:>8}", pct(get(s)));
            }
            let _ = writeln!(out);
        }
    }
    out
}
