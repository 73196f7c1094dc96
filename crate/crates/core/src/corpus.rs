//! Annotated corpus model, JSON Lines manifests and corpus statistics.
//!
//! A manifest holds one [`Conversation`] per line. Each conversation points
//! at a mono WAV file and lists speaker turns whose tokens carry
//! forced-alignment intervals and optional PII span membership.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::audio::{self, samples_to_ms, TimeInterval};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("conversation {conversation}: audio file {path} not found")]
    MissingAudio { conversation: String, path: PathBuf },
    #[error("conversation {conversation}: audio {path}: {message}")]
    BadAudio {
        conversation: String,
        path: PathBuf,
        message: String,
    },
    #[error("line {line}: malformed record: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("conversation {conversation}, turn {turn}: token intervals overlap or are empty")]
    OverlappingTokens { conversation: String, turn: usize },
    #[error("conversation {conversation}, turn {turn}: span {span} is out of range")]
    SpanOutOfRange {
        conversation: String,
        turn: usize,
        span: String,
    },
    #[error("conversation {conversation}, turn {turn}: span {span} overlaps another span")]
    OverlappingSpans {
        conversation: String,
        turn: usize,
        span: String,
    },
    #[error("conversation {conversation}, turn {turn}: span {span} disagrees with token annotations")]
    SpanMismatch {
        conversation: String,
        turn: usize,
        span: String,
    },
    #[error("conversation {conversation}, turn {turn}, token {token}: {reason}")]
    InvalidToken {
        conversation: String,
        turn: usize,
        token: usize,
        reason: String,
    },
    #[error("conversation {conversation}, turn {turn}: {reason}")]
    InvalidTurn {
        conversation: String,
        turn: usize,
        reason: String,
    },
    #[error("conversation {conversation}, turn {turn}: interval ends past the audio ({duration_ms} ms)")]
    IntervalOutOfAudio {
        conversation: String,
        turn: usize,
        duration_ms: u64,
    },
    #[error("duplicate conversation id {0}")]
    DuplicateConversation(String),
    #[error("invalid category {0:?}")]
    InvalidCategory(String),
    #[error("corpus has no tokens")]
    EmptyCorpus,
    #[error("invalid ratio band [{lo}, {hi})")]
    InvalidBand { lo: f64, hi: f64 },
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// Machine-readable form of a [`CorpusError`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conversation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub turn: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    pub message: String,
}

impl CorpusError {
    pub fn diagnostic(&self) -> Diagnostic {
        use CorpusError::*;
        let (kind, conversation, turn, span, line) = match self {
            Io { .. } => ("io", None, None, None, None),
            MissingAudio { conversation, .. } => {
                ("missing_audio", Some(conversation), None, None, None)
            }
            BadAudio { conversation, .. } => ("bad_audio", Some(conversation), None, None, None),
            MalformedRecord { line, .. } => ("malformed_record", None, None, None, Some(*line)),
            OverlappingTokens { conversation, turn } => {
                ("overlapping_tokens", Some(conversation), Some(*turn), None, None)
            }
            SpanOutOfRange {
                conversation,
                turn,
                span,
            } => ("span_out_of_range", Some(conversation), Some(*turn), Some(span), None),
            OverlappingSpans {
                conversation,
                turn,
                span,
            } => ("overlapping_spans", Some(conversation), Some(*turn), Some(span), None),
            SpanMismatch {
                conversation,
                turn,
                span,
            } => ("span_mismatch", Some(conversation), Some(*turn), Some(span), None),
            InvalidToken {
                conversation, turn, ..
            } => ("invalid_token", Some(conversation), Some(*turn), None, None),
            InvalidTurn {
                conversation, turn, ..
            } => ("invalid_turn", Some(conversation), Some(*turn), None, None),
            IntervalOutOfAudio {
                conversation, turn, ..
            } => ("interval_out_of_audio", Some(conversation), Some(*turn), None, None),
            DuplicateConversation(c) => ("duplicate_conversation", Some(c), None, None, None),
            InvalidCategory(_) => ("invalid_category", None, None, None, None),
            EmptyCorpus => ("empty_corpus", None, None, None, None),
            InvalidBand { .. } => ("invalid_band", None, None, None, None),
        };
        Diagnostic {
            kind,
            conversation: conversation.cloned(),
            turn,
            span: span.cloned(),
            line,
            message: self.to_string(),
        }
    }
}

// ---------------------------------------------------------------------------
// Domain types

/// PII category. Serialized as a lowercase identifier; any identifier that
/// is not one of the built-in kinds becomes [`Category::OtherPii`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    PersonName,
    Date,
    Number,
    Location,
    Organization,
    OtherPii(String),
}

impl Category {
    pub fn as_str(&self) -> &str {
        match self {
            Category::PersonName => "person_name",
            Category::Date => "date",
            Category::Number => "number",
            Category::Location => "location",
            Category::Organization => "organization",
            Category::OtherPii(label) => label,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "person_name" => Category::PersonName,
            "date" => Category::Date,
            "number" => Category::Number,
            "location" => Category::Location,
            "organization" => Category::Organization,
            other => {
                let ok = !other.is_empty()
                    && other
                        .bytes()
                        .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_');
                if !ok {
                    return Err(CorpusError::InvalidCategory(other.to_string()));
                }
                Category::OtherPii(other.to_string())
            }
        })
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Category {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Category {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Category::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeakerRole {
    Doctor,
    Other,
}

/// Speaker of a turn. `tag` identifies the speaker within a conversation and
/// is what same-speaker splice lookups compare.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpeakerId {
    pub role: SpeakerRole,
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    #[serde(flatten)]
    pub interval: TimeInterval,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pii: Option<String>,
}

impl Token {
    pub fn new(text: impl Into<String>, start_ms: u64, end_ms: u64) -> Self {
        Self {
            text: text.into(),
            interval: TimeInterval { start_ms, end_ms },
            pii: None,
        }
    }

    pub fn with_pii(mut self, span: impl Into<String>) -> Self {
        self.pii = Some(span.into());
        self
    }

    pub fn normalized(&self) -> String {
        normalize_token(&self.text)
    }
}

/// A PII span covering tokens `first_token..=last_token` of its turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiiSpan {
    pub id: String,
    pub category: Category,
    pub first_token: usize,
    pub last_token: usize,
}

impl PiiSpan {
    pub fn token_range(&self) -> std::ops::RangeInclusive<usize> {
        self.first_token..=self.last_token
    }
}

/// Record of a removed PII span: category and the interval it occupied,
/// without the original text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tombstone {
    pub id: String,
    pub category: Category,
    #[serde(flatten)]
    pub interval: TimeInterval,
    pub token_count: usize,
}

/// Source of a turn's token timings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alignment {
    #[default]
    Forced,
    /// Timings produced by a fallback aligner, not measured against audio.
    Synthetic,
}

impl Alignment {
    fn is_forced(&self) -> bool {
        *self == Alignment::Forced
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: SpeakerId,
    pub tokens: Vec<Token>,
    #[serde(default)]
    pub pii_spans: Vec<PiiSpan>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tombstones: Vec<Tombstone>,
    #[serde(default, skip_serializing_if = "Alignment::is_forced")]
    pub alignment: Alignment,
}

impl Turn {
    pub fn new(speaker: SpeakerId, tokens: Vec<Token>) -> Self {
        Self {
            speaker,
            tokens,
            pii_spans: Vec::new(),
            tombstones: Vec::new(),
            alignment: Alignment::Forced,
        }
    }

    pub fn has_pii(&self) -> bool {
        !self.pii_spans.is_empty()
    }

    /// Audio extent: from the first token or tombstone start to the last end.
    pub fn extent(&self) -> Option<TimeInterval> {
        self.tokens
            .iter()
            .map(|t| t.interval)
            .chain(self.tombstones.iter().map(|t| t.interval))
            .reduce(|a, b| a.hull(&b))
    }

    pub fn span(&self, id: &str) -> Option<&PiiSpan> {
        self.pii_spans.iter().find(|s| s.id == id)
    }

    /// Interval covered by a span's tokens.
    pub fn span_interval(&self, span: &PiiSpan) -> TimeInterval {
        self.tokens[span.first_token]
            .interval
            .hull(&self.tokens[span.last_token].interval)
    }

    /// Normalized words of the span, in order.
    pub fn span_phrase(&self, span: &PiiSpan) -> Vec<String> {
        self.tokens[span.token_range()]
            .iter()
            .map(Token::normalized)
            .collect()
    }

    pub fn words(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    fn validate(&self, conversation: &str, turn: usize, errors: &mut Vec<CorpusError>) {
        let overlapping = || CorpusError::OverlappingTokens {
            conversation: conversation.to_string(),
            turn,
        };
        if self.speaker.tag.is_empty() {
            errors.push(CorpusError::InvalidTurn {
                conversation: conversation.to_string(),
                turn,
                reason: "empty speaker tag".into(),
            });
        }
        if self.tokens.is_empty() && self.tombstones.is_empty() {
            errors.push(CorpusError::InvalidTurn {
                conversation: conversation.to_string(),
                turn,
                reason: "turn has no tokens".into(),
            });
        }
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.text.is_empty() || tok.text.chars().any(char::is_whitespace) {
                errors.push(CorpusError::InvalidToken {
                    conversation: conversation.to_string(),
                    turn,
                    token: i,
                    reason: format!("token text {:?} is empty or contains whitespace", tok.text),
                });
            }
        }
        let mut timeline: Vec<TimeInterval> = self
            .tokens
            .iter()
            .map(|t| t.interval)
            .chain(self.tombstones.iter().map(|t| t.interval))
            .collect();
        let tokens_ordered = self.tokens.iter().all(|t| t.interval.is_valid())
            && self
                .tokens
                .windows(2)
                .all(|w| w[0].interval.end_ms <= w[1].interval.start_ms);
        timeline.sort();
        let timeline_ok = timeline.iter().all(TimeInterval::is_valid)
            && timeline.windows(2).all(|w| w[0].end_ms <= w[1].start_ms);
        if !tokens_ordered || !timeline_ok {
            errors.push(overlapping());
        }

        // spans
        let mut owner: Vec<Option<&str>> = vec![None; self.tokens.len()];
        let mut seen = BTreeSet::new();
        for span in &self.pii_spans {
            let err_span = |kind: fn(String, usize, String) -> CorpusError| {
                kind(conversation.to_string(), turn, span.id.clone())
            };
            if !seen.insert(span.id.as_str()) {
                errors.push(err_span(|c, t, s| CorpusError::SpanMismatch {
                    conversation: c,
                    turn: t,
                    span: s,
                }));
                continue;
            }
            if span.first_token > span.last_token || span.last_token >= self.tokens.len() {
                errors.push(err_span(|c, t, s| CorpusError::SpanOutOfRange {
                    conversation: c,
                    turn: t,
                    span: s,
                }));
                continue;
            }
            let mut overlap = false;
            for slot in &mut owner[span.token_range()] {
                if slot.is_some() {
                    overlap = true;
                }
                *slot = Some(span.id.as_str());
            }
            if overlap {
                errors.push(err_span(|c, t, s| CorpusError::OverlappingSpans {
                    conversation: c,
                    turn: t,
                    span: s,
                }));
            }
        }
        let mut mismatched = BTreeSet::new();
        for (tok, slot) in self.tokens.iter().zip(&owner) {
            if tok.pii.as_deref() != *slot {
                let id = tok.pii.as_deref().or(*slot).unwrap_or_default();
                mismatched.insert(id.to_string());
            }
        }
        for span in mismatched {
            errors.push(CorpusError::SpanMismatch {
                conversation: conversation.to_string(),
                turn,
                span,
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: String,
    pub audio: PathBuf,
    pub sample_rate: u32,
    pub turns: Vec<Turn>,
}

impl Conversation {
    /// Structural checks that do not need the audio file.
    pub fn validate(&self) -> Vec<CorpusError> {
        let mut errors = Vec::new();
        let mut roles: HashMap<&str, SpeakerRole> = HashMap::new();
        for (i, turn) in self.turns.iter().enumerate() {
            turn.validate(&self.id, i, &mut errors);
            let role = *roles.entry(&turn.speaker.tag).or_insert(turn.speaker.role);
            if role != turn.speaker.role {
                errors.push(CorpusError::InvalidTurn {
                    conversation: self.id.clone(),
                    turn: i,
                    reason: format!("speaker {} changes role", turn.speaker.tag),
                });
            }
        }
        if self.sample_rate == 0 {
            errors.push(CorpusError::BadAudio {
                conversation: self.id.clone(),
                path: self.audio.clone(),
                message: "sample rate must be positive".into(),
            });
        }
        errors
    }

    /// Checks the referenced WAV exists, matches `sample_rate`, and is long
    /// enough for every interval.
    pub fn validate_audio(&self) -> Vec<CorpusError> {
        if !self.audio.is_file() {
            return vec![CorpusError::MissingAudio {
                conversation: self.id.clone(),
                path: self.audio.clone(),
            }];
        }
        let (rate, len) = match audio::wav_info(&self.audio) {
            Ok(info) => info,
            Err(e) => {
                return vec![CorpusError::BadAudio {
                    conversation: self.id.clone(),
                    path: self.audio.clone(),
                    message: e.to_string(),
                }]
            }
        };
        if rate != self.sample_rate {
            return vec![CorpusError::BadAudio {
                conversation: self.id.clone(),
                path: self.audio.clone(),
                message: format!("file is {rate} Hz, manifest says {} Hz", self.sample_rate),
            }];
        }
        let duration_ms = samples_to_ms(len, rate);
        self.turns
            .iter()
            .enumerate()
            .filter(|(_, t)| {
                t.extent()
                    .is_some_and(|e| audio::ms_to_samples(e.end_ms, rate) > len)
            })
            .map(|(i, _)| CorpusError::IntervalOutOfAudio {
                conversation: self.id.clone(),
                turn: i,
                duration_ms,
            })
            .collect()
    }

    pub fn token_count(&self) -> usize {
        self.turns.iter().map(|t| t.tokens.len()).sum()
    }
}

/// Lowercases and strips leading/trailing ASCII punctuation.
pub fn normalize_token(text: &str) -> String {
    text.trim_matches(|c: char| c.is_ascii_punctuation())
        .to_lowercase()
}

/// Splits `interval` among `words` in proportion to their character counts.
/// Every word gets at least 1 ms; returns `None` when the interval is
/// shorter than the word count.
pub fn proportional_alignment(words: &[&str], interval: TimeInterval) -> Option<Vec<TimeInterval>> {
    let n = words.len() as u64;
    let span = interval.duration_ms();
    if n == 0 || span < n {
        return None;
    }
    let weights: Vec<u64> = words.iter().map(|w| w.chars().count().max(1) as u64).collect();
    let total: u64 = weights.iter().sum();
    // Spread the slack (span - n) by weight on top of the 1 ms minimum.
    let slack = span - n;
    let mut cum = 0u64;
    let mut out = Vec::with_capacity(words.len());
    let mut start = interval.start_ms;
    for (i, w) in weights.iter().enumerate() {
        cum += w;
        let end = interval.start_ms + (i as u64 + 1) + (slack * cum + total / 2) / total;
        out.push(TimeInterval {
            start_ms: start,
            end_ms: end,
        });
        start = end;
    }
    if let Some(last) = out.last_mut() {
        last.end_ms = interval.end_ms;
    }
    Some(out)
}

// ---------------------------------------------------------------------------
// Manifest I/O

/// Options for [`load_manifest_with`].
#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    /// Open each WAV header to check existence, rate and duration.
    pub check_audio: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { check_audio: true }
    }
}

/// Loads and validates a manifest, failing on the first problem.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<Conversation>> {
    load_manifest_with(path, LoadOptions::default())
}

pub fn load_manifest_with(path: impl AsRef<Path>, options: LoadOptions) -> Result<Vec<Conversation>> {
    let (corpus, mut errors) = read_and_check(path.as_ref(), options, true)?;
    match errors.is_empty() {
        true => Ok(corpus),
        false => Err(errors.swap_remove(0)),
    }
}

/// Every problem found in a manifest; empty when it is valid.
pub fn validate_manifest(path: impl AsRef<Path>) -> Vec<CorpusError> {
    match read_and_check(path.as_ref(), LoadOptions::default(), false) {
        Ok((_, errors)) => errors,
        Err(e) => vec![e],
    }
}

fn read_and_check(
    path: &Path,
    options: LoadOptions,
    stop_early: bool,
) -> Result<(Vec<Conversation>, Vec<CorpusError>)> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let reader = BufReader::new(fs::File::open(path).map_err(io_err)?);
    let mut corpus = Vec::new();
    let mut errors = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let mut conv: Conversation = match serde_json::from_str(&line) {
            Ok(c) => c,
            Err(e) => {
                errors.push(CorpusError::MalformedRecord {
                    line: i + 1,
                    message: e.to_string(),
                });
                if stop_early {
                    break;
                }
                continue;
            }
        };
        if conv.audio.is_relative() {
            conv.audio = base.join(&conv.audio);
        }
        if !ids.insert(conv.id.clone()) {
            errors.push(CorpusError::DuplicateConversation(conv.id.clone()));
        }
        let mut errs = conv.validate();
        if errs.is_empty() && options.check_audio {
            errs = conv.validate_audio();
        }
        errors.extend(errs);
        if stop_early && !errors.is_empty() {
            break;
        }
        corpus.push(conv);
    }
    Ok((corpus, errors))
}

/// Serializes a corpus as JSON Lines, one conversation per line.
pub fn manifest_string(corpus: &[Conversation]) -> String {
    let mut out = String::new();
    for conv in corpus {
        out.push_str(&serde_json::to_string(conv).expect("conversation serializes"));
        out.push('\n');
    }
    out
}

pub fn save_manifest(corpus: &[Conversation], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(fs::File::create(path).map_err(io_err)?);
    w.write_all(manifest_string(corpus).as_bytes())
        .map_err(io_err)?;
    w.flush().map_err(io_err)
}

// ---------------------------------------------------------------------------
// Statistics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub token_count: usize,
    pub pii_token_count: usize,
    pub pii_token_fraction: f64,
    pub pii_audio_fraction: f64,
    /// Share of PII tokens per category; sums to 1 when any PII exists.
    pub category_shares: BTreeMap<Category, f64>,
    /// Share of PII tokens spoken in doctor turns.
    pub doctor_pii_share: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

pub fn corpus_stats(corpus: &[Conversation]) -> Result<CorpusStats> {
    let mut tokens = 0usize;
    let mut pii_tokens = 0usize;
    let mut total_ms = 0u64;
    let mut pii_ms = 0u64;
    let mut doctor_pii = 0usize;
    let mut per_category: BTreeMap<Category, usize> = BTreeMap::new();
    for turn in corpus.iter().flat_map(|c| &c.turns) {
        for tok in &turn.tokens {
            tokens += 1;
            let dur = tok.interval.duration_ms();
            total_ms += dur;
            let Some(span_id) = &tok.pii else { continue };
            pii_tokens += 1;
            pii_ms += dur;
            if turn.speaker.role == SpeakerRole::Doctor {
                doctor_pii += 1;
            }
            if let Some(span) = turn.span(span_id) {
                *per_category.entry(span.category.clone()).or_default() += 1;
            }
        }
    }
    if tokens == 0 {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(CorpusStats {
        token_count: tokens,
        pii_token_count: pii_tokens,
        pii_token_fraction: ratio(pii_tokens as f64, tokens as f64),
        pii_audio_fraction: ratio(pii_ms as f64, total_ms as f64),
        category_shares: per_category
            .into_iter()
            .map(|(c, n)| (c, ratio(n as f64, pii_tokens as f64)))
            .collect(),
        doctor_pii_share: ratio(doctor_pii as f64, pii_tokens as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRatio {
    pub token: String,
    pub count_before: usize,
    pub count_after: usize,
    pub ratio: f64,
}

/// Normalized token counts over every token in the corpus.
pub fn token_counts(corpus: &[Conversation]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for tok in corpus
        .iter()
        .flat_map(|c| &c.turns)
        .flat_map(|t| &t.tokens)
    {
        let norm = tok.normalized();
        if !norm.is_empty() {
            *counts.entry(norm).or_insert(0) += 1;
        }
    }
    counts
}

/// After/before frequency ratio for every token present before, sorted by token.
pub fn frequency_ratios(before: &[Conversation], after: &[Conversation]) -> Vec<FrequencyRatio> {
    let after = token_counts(after);
    token_counts(before)
        .into_iter()
        .map(|(token, count_before)| {
            let count_after = after.get(&token).copied().unwrap_or(0);
            FrequencyRatio {
                ratio: count_after as f64 / count_before as f64,
                token,
                count_before,
                count_after,
            }
        })
        .collect()
}

/// Tokens with `lo <= ratio < hi`.
pub fn band_select(ratios: &[FrequencyRatio], lo: f64, hi: f64) -> Result<BTreeSet<String>> {
    if !(0.0..1.0).contains(&lo) || !(hi > lo && hi <= 1.0) {
        return Err(CorpusError::InvalidBand { lo, hi });
    }
    Ok(ratios
        .iter()
        .filter(|r| r.ratio >= lo && r.ratio < hi)
        .map(|r| r.token.clone())
        .collect())
}

/// The two reporting bands: `r10` = [0, 0.10) and `r20` = [0.10, 0.20).
pub fn standard_bands(ratios: &[FrequencyRatio]) -> BTreeMap<String, BTreeSet<String>> {
    [("r10", 0.0, 0.10), ("r20", 0.10, 0.20)]
        .into_iter()
        .map(|(name, lo, hi)| {
            (
                name.to_string(),
                band_select(ratios, lo, hi).expect("static bands are valid"),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spk(role: SpeakerRole, tag: &str) -> SpeakerId {
        SpeakerId {
            role,
            tag: tag.into(),
        }
    }

    fn turn_with_span() -> Turn {
        let mut t = Turn::new(
            spk(SpeakerRole::Doctor, "dr"),
            vec![
                Token::new("hello", 0, 100),
                Token::new("Michael,", 120, 300).with_pii("s1"),
                Token::new("today", 320, 500),
            ],
        );
        t.pii_spans.push(PiiSpan {
            id: "s1".into(),
            category: Category::PersonName,
            first_token: 1,
            last_token: 1,
        });
        t
    }

    fn conv(turns: Vec<Turn>) -> Conversation {
        Conversation {
            id: "c1".into(),
            audio: "c1.wav".into(),
            sample_rate: 16_000,
            turns,
        }
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_token("Michael,"), "michael");
        assert_eq!(normalize_token("\"6/3\""), "6/3");
        assert_eq!(normalize_token("don't"), "don't");
        assert_eq!(normalize_token("..."), "");
    }

    #[test]
    fn category_serialization() {
        assert_eq!(serde_json::to_string(&Category::PersonName).unwrap(), "\"person_name\"");
        let c: Category = serde_json::from_str("\"mrn\"").unwrap();
        assert_eq!(c, Category::OtherPii("mrn".into()));
        assert!(Category::parse("Bad Label").is_err());
        assert!(Category::parse("").is_err());
    }

    #[test]
    fn valid_turn_passes() {
        assert!(conv(vec![turn_with_span()]).validate().is_empty());
    }

    #[test]
    fn empty_token_interval_is_overlap_error() {
        let mut t = turn_with_span();
        t.tokens[2].interval.end_ms = 320;
        let errs = conv(vec![t]).validate();
        assert!(matches!(
            errs.as_slice(),
            [CorpusError::OverlappingTokens { turn: 0, .. }]
        ));
    }

    #[test]
    fn span_errors() {
        let mut t = turn_with_span();
        t.pii_spans[0].last_token = 7;
        let errs = conv(vec![t]).validate();
        assert!(errs.iter().any(|e| matches!(e, CorpusError::SpanOutOfRange { span, .. } if span == "s1")));

        let mut t = turn_with_span();
        t.tokens[0].pii = Some("s1".into());
        let errs = conv(vec![t]).validate();
        assert!(errs.iter().any(|e| matches!(e, CorpusError::SpanMismatch { .. })));
    }

    #[test]
    fn role_conflict_detected() {
        let a = turn_with_span();
        let mut b = turn_with_span();
        b.speaker.role = SpeakerRole::Other;
        for tok in &mut b.tokens {
            tok.interval.start_ms += 1000;
            tok.interval.end_ms += 1000;
        }
        assert_eq!(conv(vec![a, b]).validate().len(), 1);
    }

    #[test]
    fn stats_with_and_without_pii() {
        let c = conv(vec![turn_with_span()]);
        let s = corpus_stats(std::slice::from_ref(&c)).unwrap();
        assert!((s.pii_token_fraction - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.pii_audio_fraction - 180.0 / 460.0).abs() < 1e-12);
        assert_eq!(s.doctor_pii_share, 1.0);
        assert_eq!(s.category_shares[&Category::PersonName], 1.0);

        let plain = conv(vec![Turn::new(
            spk(SpeakerRole::Other, "p"),
            vec![Token::new("fine", 0, 10)],
        )]);
        let s = corpus_stats(&[plain]).unwrap();
        assert_eq!(
            (s.pii_token_fraction, s.pii_audio_fraction, s.doctor_pii_share),
            (0.0, 0.0, 0.0)
        );
        assert!(s.category_shares.is_empty());
        assert!(matches!(corpus_stats(&[]), Err(CorpusError::EmptyCorpus)));
    }

    fn ratio(token: &str, before: usize, after: usize) -> FrequencyRatio {
        FrequencyRatio {
            token: token.into(),
            count_before: before,
            count_after: after,
            ratio: after as f64 / before as f64,
        }
    }

    #[test]
    fn bands_are_half_open() {
        let rs = vec![ratio("a", 50, 4), ratio("b", 10, 1), ratio("c", 10, 4)];
        assert_eq!(rs[0].ratio, 0.08);
        let bands = standard_bands(&rs);
        assert!(bands["r10"].contains("a") && !bands["r20"].contains("a"));
        assert!(bands["r20"].contains("b") && !bands["r10"].contains("b"));
        assert!(!bands["r10"].contains("c") && !bands["r20"].contains("c"));
        assert!(band_select(&rs, 0.2, 0.1).is_err());
        assert!(band_select(&rs, -0.1, 0.1).is_err());
        assert!(band_select(&rs, 0.0, 1.5).is_err());
    }

    #[test]
    fn proportional_alignment_covers_interval() {
        let iv = TimeInterval::new(100, 400).unwrap();
        let out = proportional_alignment(&["went", "to", "boston"], iv).unwrap();
        assert_eq!(out.first().unwrap().start_ms, 100);
        assert_eq!(out.last().unwrap().end_ms, 400);
        assert!(out.iter().all(TimeInterval::is_valid));
        assert!(out.windows(2).all(|w| w[0].end_ms == w[1].start_ms));
        assert!(proportional_alignment(&["a", "b", "c"], TimeInterval::new(0, 2).unwrap()).is_none());
    }
}
