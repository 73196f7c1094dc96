//! Corpus splicing: surrogate words are cut out of other non-PII
//! occurrences in the corpus and stitched into the redacted turn.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{trim_bounds, AudioBuffer, AudioError, TimeInterval, DEFAULT_FRAME_MS, DEFAULT_THRESHOLD_DBFS};
use crate::corpus::{normalize_token, Category, Conversation, SpeakerId, Turn};
use crate::num::Sample;
use crate::seed;
use crate::stitch::{stitch, AssembledTurn, Piece, SegmentSource};
use crate::surrogate::ReplacementPlan;

#[derive(Debug, Error)]
pub enum SpliceError {
    #[error("cannot read audio for conversation {conversation_id}: {message}")]
    AudioReadFailure {
        conversation_id: String,
        message: String,
    },
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("plan does not match the turn's tombstones")]
    PlanMismatch,
    #[error("index cache {0}")]
    Cache(String),
}

/// One non-PII token of the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    pub conversation_id: String,
    pub turn_index: usize,
    pub speaker: SpeakerId,
    pub interval: TimeInterval,
    pub normalized_token: String,
}

/// Normalized token -> every non-PII occurrence, ordered by
/// (conversation, turn, start).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpliceIndex {
    entries: BTreeMap<String, Vec<Occurrence>>,
}

const CACHE_FORMAT: &str = "deidforge-splice-index";
const CACHE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CacheHeader {
    format: String,
    version: u32,
}

impl SpliceIndex {
    pub fn lookup(&self, token: &str) -> &[Occurrence] {
        self.entries.get(token).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn occurrences(&self) -> impl Iterator<Item = &Occurrence> {
        self.entries.values().flatten()
    }

    /// Writes a JSON Lines cache: a header line, then one occurrence per line.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SpliceError> {
        let io = |e: std::io::Error| SpliceError::Cache(e.to_string());
        let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
        let header = CacheHeader {
            format: CACHE_FORMAT.into(),
            version: CACHE_VERSION,
        };
        writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes")).map_err(io)?;
        for occ in self.occurrences() {
            writeln!(w, "{}", serde_json::to_string(occ).expect("occurrence serializes")).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SpliceError> {
        let io = |e: std::io::Error| SpliceError::Cache(e.to_string());
        let mut lines = BufReader::new(fs::File::open(path).map_err(io)?).lines();
        let header: CacheHeader = lines
            .next()
            .ok_or_else(|| SpliceError::Cache("empty file".into()))?
            .map_err(io)
            .and_then(|l| serde_json::from_str(&l).map_err(|e| SpliceError::Cache(e.to_string())))?;
        if header.format != CACHE_FORMAT || header.version != CACHE_VERSION {
            return Err(SpliceError::Cache(format!(
                "unsupported format {} v{}",
                header.format, header.version
            )));
        }
        let mut index = SpliceIndex::default();
        for line in lines {
            let occ: Occurrence = serde_json::from_str(&line.map_err(io)?)
                .map_err(|e| SpliceError::Cache(e.to_string()))?;
            index
                .entries
                .entry(occ.normalized_token.clone())
                .or_default()
                .push(occ);
        }
        index.sort();
        Ok(index)
    }

    fn sort(&mut self) {
        for list in self.entries.values_mut() {
            list.sort_by(|a, b| {
                (&a.conversation_id, a.turn_index, a.interval.start_ms).cmp(&(
                    &b.conversation_id,
                    b.turn_index,
                    b.interval.start_ms,
                ))
            });
        }
    }
}

/// Indexes every token that is not part of a PII span.
pub fn build_index(corpus: &[Conversation]) -> SpliceIndex {
    let mut index = SpliceIndex::default();
    for conv in corpus {
        for (ti, turn) in conv.turns.iter().enumerate() {
            for tok in turn.tokens.iter().filter(|t| t.pii.is_none()) {
                let norm = tok.normalized();
                if norm.is_empty() {
                    continue;
                }
                index.entries.entry(norm.clone()).or_default().push(Occurrence {
                    conversation_id: conv.id.clone(),
                    turn_index: ti,
                    speaker: turn.speaker.clone(),
                    interval: tok.interval,
                    normalized_token: norm,
                });
            }
        }
    }
    index.sort();
    index
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpliceStrategy {
    /// Same-speaker snippets only.
    #[serde(rename = "sd")]
    SpeakerDependent,
    /// Same speaker first, any speaker otherwise.
    #[serde(rename = "sp")]
    SpeakerPreferred,
}

/// What happens to a turn when a surrogate word cannot be found.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissPolicy {
    #[default]
    SkipTurn,
    DropParts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution<'a> {
    Hit {
        occurrence: &'a Occurrence,
        speaker_match: bool,
    },
    Miss,
}

/// Picks a source occurrence for `token`. The draw is uniform and seeded by
/// `rng_seed`; with the same seed, speaker-preferred picks exactly what
/// speaker-dependent picks whenever a same-speaker occurrence exists.
pub fn resolve<'a>(
    token: &str,
    speaker: &SpeakerId,
    strategy: SpliceStrategy,
    index: &'a SpliceIndex,
    rng_seed: u64,
) -> Resolution<'a> {
    let all = index.lookup(token);
    let same: Vec<&Occurrence> = all.iter().filter(|o| o.speaker.tag == speaker.tag).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    if !same.is_empty() {
        return Resolution::Hit {
            occurrence: same[rng.random_range(0..same.len())],
            speaker_match: true,
        };
    }
    match strategy {
        SpliceStrategy::SpeakerPreferred if !all.is_empty() => Resolution::Hit {
            occurrence: &all[rng.random_range(0..all.len())],
            speaker_match: false,
        },
        _ => Resolution::Miss,
    }
}

/// Access to (redacted) conversation audio by id.
pub trait AudioSource<S: Sample>: Sync {
    fn audio(&self, conversation_id: &str) -> Result<Arc<AudioBuffer<S>>, SpliceError>;
}

impl<S: Sample> AudioSource<S> for HashMap<String, Arc<AudioBuffer<S>>> {
    fn audio(&self, conversation_id: &str) -> Result<Arc<AudioBuffer<S>>, SpliceError> {
        self.get(conversation_id)
            .cloned()
            .ok_or_else(|| SpliceError::AudioReadFailure {
                conversation_id: conversation_id.to_string(),
                message: "unknown conversation".into(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpliceStatus {
    Success,
    SkippedTurn,
    DroppedParts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRef {
    pub conversation: String,
    pub turn: usize,
    pub start_ms: u64,
    pub end_ms: u64,
    pub speaker: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedToken {
    pub token: String,
    pub tombstone: String,
    pub source: Option<SourceRef>,
    pub speaker_match: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TombstoneOutcome {
    pub id: String,
    pub category: Category,
    pub resolved: bool,
}

/// Per-turn result, written to the outcome log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpliceOutcome {
    pub conversation: String,
    pub turn: usize,
    pub strategy: SpliceStrategy,
    pub status: SpliceStatus,
    pub resolved: Vec<ResolvedToken>,
    pub tombstones: Vec<TombstoneOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplicedTurn<S: Sample> {
    /// `None` when the turn is excluded from the output.
    pub assembled: Option<AssembledTurn<S>>,
    pub outcome: SpliceOutcome,
}

/// Everything [`assemble_spliced_turn`] needs besides the turn itself.
pub struct SpliceContext<'a, S: Sample> {
    pub conversation_id: &'a str,
    pub turn_index: usize,
    pub strategy: SpliceStrategy,
    pub index: &'a SpliceIndex,
    pub sources: &'a dyn AudioSource<S>,
    pub miss_policy: MissPolicy,
    pub seed: u64,
}

fn draw_seed(seed: u64, conversation: &str, turn: usize, tombstone: &str, word: usize) -> u64 {
    seed::derive(
        seed,
        &[
            b"splice",
            conversation.as_bytes(),
            &(turn as u64).to_le_bytes(),
            tombstone.as_bytes(),
            &(word as u64).to_le_bytes(),
        ],
    )
}

/// Extracts a snippet: slice, trim silence, level-match to `host_level`.
/// `None` when the snippet is silent after trimming.
fn extract<S: Sample>(
    occ: &Occurrence,
    sources: &dyn AudioSource<S>,
    host_level: S,
) -> Result<Option<(AudioBuffer<S>, SegmentSource)>, SpliceError> {
    let audio = sources.audio(&occ.conversation_id)?;
    let raw_range = occ.interval.to_samples(audio.sample_rate());
    let raw = audio.slice_samples(raw_range.clone())?;
    let keep = trim_bounds(&raw, DEFAULT_THRESHOLD_DBFS, DEFAULT_FRAME_MS);
    if keep.is_empty() {
        return Ok(None);
    }
    let trimmed = raw.slice_samples(keep.clone())?;
    let (buffer, gain) = if host_level > S::zero() {
        match trimmed.match_rms(host_level) {
            Ok(m) => (m.buffer, m.gain),
            Err(AudioError::SilentSnippet) => return Ok(None),
            Err(e) => return Err(e.into()),
        }
    } else {
        (trimmed, 1.0)
    };
    let range = raw_range.start + keep.start..raw_range.start + keep.end;
    Ok(Some((
        buffer,
        SegmentSource::Snippet {
            conversation_id: occ.conversation_id.clone(),
            range,
            gain,
        },
    )))
}

/// Splices a redacted turn. `host` is the redacted audio of the turn's
/// conversation. Snippets are trimmed, then level-matched to the host
/// turn's active RMS.
pub fn assemble_spliced_turn<S: Sample>(
    turn: &Turn,
    plan: &ReplacementPlan,
    host: &AudioBuffer<S>,
    ctx: &SpliceContext<'_, S>,
) -> Result<SplicedTurn<S>, SpliceError> {
    let mut tombstones: Vec<_> = turn.tombstones.iter().collect();
    tombstones.sort_by_key(|t| t.interval);
    if tombstones.len() != plan.entries.len()
        || tombstones
            .iter()
            .zip(&plan.entries)
            .any(|(t, e)| t.id != e.tombstone_id)
    {
        return Err(SpliceError::PlanMismatch);
    }

    let host_level = match turn.extent() {
        Some(extent) => {
            let slice = host.slice(&extent)?;
            if slice.is_empty() {
                S::zero()
            } else {
                slice.rms(true)?
            }
        }
        None => S::zero(),
    };

    let mut resolved = Vec::new();
    let mut tomb_outcomes = Vec::new();
    let mut pieces: Vec<Option<Piece<S>>> = Vec::new();
    for entry in &plan.entries {
        let mut piece = Piece {
            parts: Vec::new(),
            words: Vec::new(),
        };
        let mut ok = true;
        let mut offset = 0usize;
        for (wi, word) in entry.surrogate.iter().enumerate() {
            let norm = normalize_token(word);
            let seed = draw_seed(ctx.seed, ctx.conversation_id, ctx.turn_index, &entry.tombstone_id, wi);
            let hit = match resolve(&norm, &turn.speaker, ctx.strategy, ctx.index, seed) {
                Resolution::Hit {
                    occurrence,
                    speaker_match,
                } => extract(occurrence, ctx.sources, host_level)?
                    .map(|snippet| (occurrence, speaker_match, snippet)),
                Resolution::Miss => None,
            };
            match hit {
                Some((occ, speaker_match, (buffer, source))) => {
                    resolved.push(ResolvedToken {
                        token: word.clone(),
                        tombstone: entry.tombstone_id.clone(),
                        source: Some(SourceRef {
                            conversation: occ.conversation_id.clone(),
                            turn: occ.turn_index,
                            start_ms: occ.interval.start_ms,
                            end_ms: occ.interval.end_ms,
                            speaker: occ.speaker.tag.clone(),
                        }),
                        speaker_match,
                    });
                    piece.words.push((word.clone(), offset..offset + buffer.len()));
                    offset += buffer.len();
                    piece.parts.push((buffer, source));
                }
                None => {
                    ok = false;
                    resolved.push(ResolvedToken {
                        token: word.clone(),
                        tombstone: entry.tombstone_id.clone(),
                        source: None,
                        speaker_match: false,
                    });
                }
            }
        }
        ok &= !piece.parts.is_empty();
        tomb_outcomes.push(TombstoneOutcome {
            id: entry.tombstone_id.clone(),
            category: entry.category.clone(),
            resolved: ok,
        });
        pieces.push(ok.then_some(piece));
    }

    let complete = tomb_outcomes.iter().all(|t| t.resolved);
    let status = match (complete, ctx.miss_policy) {
        (true, _) => SpliceStatus::Success,
        (false, MissPolicy::SkipTurn) => SpliceStatus::SkippedTurn,
        (false, MissPolicy::DropParts) => SpliceStatus::DroppedParts,
    };
    let assembled = match status {
        SpliceStatus::SkippedTurn => None,
        _ => Some(stitch(turn, host, pieces)?).filter(|a| !a.tokens.is_empty()),
    };
    Ok(SplicedTurn {
        assembled,
        outcome: SpliceOutcome {
            conversation: ctx.conversation_id.to_string(),
            turn: ctx.turn_index,
            strategy: ctx.strategy,
            status,
            resolved,
            tombstones: tomb_outcomes,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyStats {
    pub turns_with_tombstones: usize,
    pub successful_turns: usize,
    /// Successful turns over turns with tombstones (0 when there are none).
    pub success_fraction: f64,
    /// Per category, the fraction of tombstones whose surrogate was fully spliced.
    pub per_category_success: BTreeMap<Category, f64>,
}

pub fn efficiency_stats<'a>(outcomes: impl IntoIterator<Item = &'a SpliceOutcome>) -> EfficiencyStats {
    let mut turns = 0usize;
    let mut ok = 0usize;
    let mut per_cat: BTreeMap<Category, (usize, usize)> = BTreeMap::new();
    for o in outcomes {
        if o.tombstones.is_empty() {
            continue;
        }
        turns += 1;
        if o.status == SpliceStatus::Success {
            ok += 1;
        }
        for t in &o.tombstones {
            let e = per_cat.entry(t.category.clone()).or_default();
            e.1 += 1;
            if t.resolved {
                e.0 += 1;
            }
        }
    }
    EfficiencyStats {
        turns_with_tombstones: turns,
        successful_turns: ok,
        success_fraction: if turns == 0 { 0.0 } else { ok as f64 / turns as f64 },
        per_category_success: per_cat
            .into_iter()
            .map(|(c, (hit, n))| (c, hit as f64 / n as f64))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{PiiSpan, SpeakerRole, Token};

    fn spk(tag: &str) -> SpeakerId {
        SpeakerId {
            role: SpeakerRole::Other,
            tag: tag.into(),
        }
    }

    fn occ(conv: &str, tag: &str, start: u64) -> Occurrence {
        Occurrence {
            conversation_id: conv.into(),
            turn_index: 0,
            speaker: spk(tag),
            interval: TimeInterval::new(start, start + 100).unwrap(),
            normalized_token: "july".into(),
        }
    }

    fn index_of(occs: Vec<Occurrence>) -> SpliceIndex {
        let mut index = SpliceIndex::default();
        index.entries.insert("july".into(), occs);
        index.sort();
        index
    }

    #[test]
    fn index_excludes_pii() {
        let mut turn = Turn::new(
            spk("a"),
            vec![
                Token::new("July", 0, 100),
                Token::new("july", 200, 300).with_pii("d"),
                Token::new("july,", 400, 500),
                Token::new("boston", 600, 700).with_pii("l"),
            ],
        );
        turn.pii_spans = vec![
            PiiSpan {
                id: "d".into(),
                category: Category::Date,
                first_token: 1,
                last_token: 1,
            },
            PiiSpan {
                id: "l".into(),
                category: Category::Location,
                first_token: 3,
                last_token: 3,
            },
        ];
        let conv = Conversation {
            id: "c".into(),
            audio: "c.wav".into(),
            sample_rate: 16_000,
            turns: vec![turn],
        };
        let index = build_index(&[conv]);
        assert_eq!(index.lookup("july").len(), 2);
        assert!(index.lookup("boston").is_empty());
    }

    #[test]
    fn sd_and_sp_resolution() {
        let index = index_of(vec![occ("c1", "b", 0), occ("c2", "c", 0)]);
        assert_eq!(
            resolve("july", &spk("a"), SpliceStrategy::SpeakerDependent, &index, 1),
            Resolution::Miss
        );
        match resolve("july", &spk("a"), SpliceStrategy::SpeakerPreferred, &index, 1) {
            Resolution::Hit {
                occurrence,
                speaker_match,
            } => {
                assert!(!speaker_match);
                assert!(occurrence.speaker.tag == "b" || occurrence.speaker.tag == "c");
            }
            Resolution::Miss => panic!("SP must fall back"),
        }
        let index = index_of(vec![occ("c1", "a", 0), occ("c2", "c", 0)]);
        for s in [SpliceStrategy::SpeakerDependent, SpliceStrategy::SpeakerPreferred] {
            assert!(matches!(
                resolve("july", &spk("a"), s, &index, 9),
                Resolution::Hit { occurrence, speaker_match: true } if occurrence.conversation_id == "c1"
            ));
        }
    }

    #[test]
    fn efficiency_arithmetic() {
        let outcome = |status| SpliceOutcome {
            conversation: "c".into(),
            turn: 0,
            strategy: SpliceStrategy::SpeakerDependent,
            status,
            resolved: vec![],
            tombstones: vec![TombstoneOutcome {
                id: "t".into(),
                category: Category::Date,
                resolved: status == SpliceStatus::Success,
            }],
        };
        let all: Vec<_> = (0..3).map(|_| outcome(SpliceStatus::Success)).collect();
        assert_eq!(efficiency_stats(&all).success_fraction, 1.0);
        let mut mixed: Vec<_> = (0..10).map(|_| outcome(SpliceStatus::SkippedTurn)).collect();
        mixed.extend((0..2).map(|_| outcome(SpliceStatus::Success)));
        let stats = efficiency_stats(&mixed);
        assert!((stats.success_fraction - 2.0 / 12.0).abs() < 1e-12);
        assert!((stats.per_category_success[&Category::Date] - 2.0 / 12.0).abs() < 1e-12);
        assert_eq!(efficiency_stats(&[]).success_fraction, 0.0);
    }

    #[test]
    fn cache_round_trip() {
        let index = index_of(vec![occ("c2", "b", 0), occ("c1", "a", 300), occ("c1", "a", 100)]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.jsonl");
        index.save(&path).unwrap();
        assert_eq!(SpliceIndex::load(&path).unwrap(), index);
        fs::write(&path, "{\"format\":\"other\",\"version\":1}\n").unwrap();
        assert!(SpliceIndex::load(&path).is_err());
    }
}
