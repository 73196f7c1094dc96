//! Corpus builds, one per strategy, and the privacy audit.
//!
//! A build reads an identified corpus and writes, under `<out>/<strategy>/`,
//! a manifest with one record per output turn, the turn audio as
//! `audio/{conversation}_{turn}.wav`, an outcome log and a report. Turns
//! without PII are copied from the original audio in every strategy.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audio::{encode_wav, read_wav, AudioError, TimeInterval};
use crate::corpus::{corpus_stats, manifest_string, normalize_token, Alignment, Conversation, CorpusError, Token, Turn};
use crate::deid::{redact, DeidError};
use crate::seed;
use crate::splice::{
    assemble_spliced_turn, build_index, efficiency_stats, EfficiencyStats, MissPolicy, SpliceContext,
    SpliceIndex, SpliceOutcome, SpliceStatus, SpliceStrategy,
};
use crate::stitch::AssembledTurn;
use crate::surrogate::{plan_turn, Exclusions, Lexicon, SurrogateConfig, SurrogateGenerator};
use crate::tts::{assemble_tts_token_turn, assemble_tts_turn, Synthesizer, TtsConfig};
use crate::AudioBuffer;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("conversation {conversation}: {source}")]
    Audio {
        conversation: String,
        source: AudioError,
    },
    #[error(transparent)]
    Deid(#[from] DeidError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("worker pool: {0}")]
    Workers(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    BaselineId,
    BaselineTurn,
    BaselineToken,
    TtsToken,
    TtsTurn,
    #[serde(rename = "spliced-sd")]
    SplicedSd,
    #[serde(rename = "spliced-sp")]
    SplicedSp,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::BaselineId,
        Strategy::BaselineTurn,
        Strategy::BaselineToken,
        Strategy::TtsToken,
        Strategy::TtsTurn,
        Strategy::SplicedSd,
        Strategy::SplicedSp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::BaselineId => "baseline-id",
            Strategy::BaselineTurn => "baseline-turn",
            Strategy::BaselineToken => "baseline-token",
            Strategy::TtsToken => "tts-token",
            Strategy::TtsTurn => "tts-turn",
            Strategy::SplicedSd => "spliced-sd",
            Strategy::SplicedSp => "spliced-sp",
        }
    }

    /// Short model label: B1-B3 baselines, T1-T2 synthesis, S1-S2 splicing.
    pub fn model_id(self) -> &'static str {
        match self {
            Strategy::BaselineId => "B1",
            Strategy::BaselineTurn => "B2",
            Strategy::BaselineToken => "B3",
            Strategy::TtsToken => "T1",
            Strategy::TtsTurn => "T2",
            Strategy::SplicedSd => "S1",
            Strategy::SplicedSp => "S2",
        }
    }

    fn splice(self) -> Option<SpliceStrategy> {
        match self {
            Strategy::SplicedSd => Some(SpliceStrategy::SpeakerDependent),
            Strategy::SplicedSp => Some(SpliceStrategy::SpeakerPreferred),
            _ => None,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s || st.model_id().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown strategy {s:?}"))
    }
}

/// Everything a build depends on besides the corpus.
pub struct BuildOptions<'a> {
    pub strategy: Strategy,
    pub seed: u64,
    pub surrogate: SurrogateConfig,
    pub miss_policy: MissPolicy,
    pub tts: TtsConfig,
    pub synthesizer: &'a dyn Synthesizer,
    /// Label of the synthesizer (`stub` or the endpoint), part of the
    /// config digest.
    pub synthesizer_label: String,
    pub lexicon: &'a Lexicon,
    pub workers: usize,
}

#[derive(Serialize)]
struct DigestedSettings<'a> {
    surrogate: &'a SurrogateConfig,
    miss_policy: MissPolicy,
    tts: &'a TtsConfig,
    synthesizer: &'a str,
    lexicon: String,
}

impl BuildOptions<'_> {
    /// SHA-256 of every setting that can change the output. The seed and
    /// strategy are reported separately.
    pub fn config_digest(&self) -> String {
        let surrogate = SurrogateConfig {
            seed: self.seed,
            ..self.surrogate.clone()
        };
        let settings = DigestedSettings {
            surrogate: &surrogate,
            miss_policy: self.miss_policy,
            tts: &self.tts,
            synthesizer: &self.synthesizer_label,
            lexicon: self.lexicon.digest(),
        };
        hex::encode(Sha256::digest(serde_json::to_vec(&settings).expect("settings serialize")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnStatus {
    /// Written to the output.
    Kept,
    /// Removed by the strategy (turn-level baseline).
    Dropped,
    /// No words left after processing.
    Empty,
    /// A surrogate word could not be spliced and the policy skips the turn.
    Skipped,
    /// Hard failure; see `reason`.
    Excluded,
}

/// One line of the outcome log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnOutcome {
    pub conversation: String,
    pub turn: usize,
    pub status: TurnStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub voice: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub splice: Option<SpliceOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub strategy: Strategy,
    pub model: String,
    pub seed: u64,
    pub config_digest: String,
    pub input_digest: String,
    /// SHA-256 over the manifest bytes followed by every audio file.
    pub output_digest: String,
    pub input_conversations: usize,
    pub input_turns: usize,
    pub input_tokens: usize,
    pub output_turns: usize,
    pub output_tokens: usize,
    pub pii_fraction_before: f64,
    pub pii_fraction_after: f64,
    pub excluded_turns: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub splice_efficiency: Option<EfficiencyStats>,
    pub manifest: String,
    pub outcome_log: String,
}

#[derive(Debug, Clone)]
pub struct BuildResult {
    pub report: BuildReport,
    pub outcomes: Vec<TurnOutcome>,
    /// Output records; audio paths are relative to `dir`.
    pub output: Vec<Conversation>,
    pub dir: PathBuf,
}

impl BuildResult {
    /// Turns whose splice resolved every surrogate word.
    pub fn spliced_turns(&self) -> BTreeSet<(String, usize)> {
        self.outcomes
            .iter()
            .filter(|o| o.splice.as_ref().is_some_and(|s| s.status == SpliceStatus::Success))
            .map(|o| (o.conversation.clone(), o.turn))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Privacy

/// Normalized PII phrases of an identified corpus that never occur as a
/// run of non-PII words. These are the phrases no output may contain.
pub fn audit_phrases(corpus: &[Conversation]) -> BTreeSet<Vec<String>> {
    let mut phrases = BTreeSet::new();
    for turn in corpus.iter().flat_map(|c| &c.turns) {
        for span in &turn.pii_spans {
            let p: Vec<String> = turn
                .span_phrase(span)
                .iter()
                .map(|w| normalize_token(w))
                .filter(|w| !w.is_empty())
                .collect();
            if !p.is_empty() {
                phrases.insert(p);
            }
        }
    }
    let lengths: BTreeSet<usize> = phrases.iter().map(Vec::len).collect();
    let mut public: HashSet<Vec<String>> = HashSet::new();
    for turn in corpus.iter().flat_map(|c| &c.turns) {
        for run in turn.tokens.split(|t| t.pii.is_some()) {
            let words: Vec<String> = run.iter().map(Token::normalized).filter(|w| !w.is_empty()).collect();
            for &n in &lengths {
                public.extend(words.windows(n).filter(|w| phrases.contains(*w)).map(<[String]>::to_vec));
            }
        }
    }
    phrases.retain(|p| !public.contains(p));
    phrases
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub conversation: String,
    pub turn: usize,
    pub phrase: String,
}

fn find_phrase<'a>(words: &[String], phrases: &'a BTreeSet<Vec<String>>, lengths: &[usize]) -> Option<&'a Vec<String>> {
    lengths
        .iter()
        .flat_map(|&n| words.windows(n))
        .find_map(|w| phrases.get(w))
}

/// Every turn of `output` whose normalized words contain one of `phrases`.
pub fn verify_privacy(output: &[Conversation], phrases: &BTreeSet<Vec<String>>) -> Vec<Violation> {
    let lengths: Vec<usize> = phrases.iter().map(Vec::len).collect::<BTreeSet<_>>().into_iter().collect();
    let mut out = Vec::new();
    for conv in output {
        for (ti, turn) in conv.turns.iter().enumerate() {
            let words: Vec<String> = turn.tokens.iter().map(Token::normalized).filter(|w| !w.is_empty()).collect();
            if let Some(p) = find_phrase(&words, phrases, &lengths) {
                out.push(Violation {
                    conversation: conv.id.clone(),
                    turn: ti,
                    phrase: p.join(" "),
                });
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Build

/// SHA-256 over each conversation's id, rate, turns and audio bytes.
pub fn input_digest(corpus: &[Conversation]) -> Result<String, PipelineError> {
    let mut h = Sha256::new();
    for conv in corpus {
        h.update(conv.id.as_bytes());
        h.update(conv.sample_rate.to_le_bytes());
        h.update(serde_json::to_vec(&conv.turns).expect("turns serialize"));
        let bytes = fs::read(&conv.audio).map_err(|source| PipelineError::Io {
            path: conv.audio.clone(),
            source,
        })?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

struct Ctx<'a> {
    corpus: &'a [Conversation],
    audio: Vec<Arc<AudioBuffer>>,
    redacted: Vec<Conversation>,
    redacted_audio: HashMap<String, Arc<AudioBuffer>>,
    index: SpliceIndex,
    generator: SurrogateGenerator<'a>,
    guard: BTreeSet<Vec<String>>,
    guard_lengths: Vec<usize>,
    opts: &'a BuildOptions<'a>,
}

enum Step {
    Keep {
        turn: Turn,
        audio: AudioBuffer,
        voice: Option<String>,
        splice: Option<SpliceOutcome>,
    },
    Drop {
        status: TurnStatus,
        splice: Option<SpliceOutcome>,
    },
}

struct TurnResult {
    record: Option<(Conversation, AudioBuffer)>,
    outcome: Option<TurnOutcome>,
}

fn shift(interval: TimeInterval, by: u64) -> TimeInterval {
    TimeInterval {
        start_ms: interval.start_ms - by,
        end_ms: interval.end_ms - by,
    }
}

/// The turn's extent cut from `audio`, with timings made relative.
fn excerpt(turn: &Turn, audio: &AudioBuffer) -> Result<(Turn, AudioBuffer), AudioError> {
    let extent = turn.extent().ok_or(AudioError::EmptyBuffer)?;
    let mut out = turn.clone();
    for t in &mut out.tokens {
        t.interval = shift(t.interval, extent.start_ms);
    }
    for t in &mut out.tombstones {
        t.interval = shift(t.interval, extent.start_ms);
    }
    Ok((out, audio.slice(&extent)?))
}

fn assembled_turn(speaker: &Turn, assembled: AssembledTurn<f32>, alignment: Alignment) -> (Turn, AudioBuffer) {
    let mut turn = Turn::new(speaker.speaker.clone(), assembled.tokens);
    turn.alignment = alignment;
    (turn, assembled.audio)
}

impl Ctx<'_> {
    fn turn_seed(&self, purpose: &[u8], conversation: &str, turn: usize) -> u64 {
        seed::derive(self.opts.seed, &[purpose, conversation.as_bytes(), &(turn as u64).to_le_bytes()])
    }

    fn process_pii_turn(&self, ci: usize, ti: usize) -> Result<Step, String> {
        let conv = &self.corpus[ci];
        let identified = &conv.turns[ti];
        let redacted = &self.redacted[ci].turns[ti];
        let host = &self.redacted_audio[&conv.id];
        let keep = |(turn, audio): (Turn, AudioBuffer), voice, splice| Step::Keep {
            turn,
            audio,
            voice,
            splice,
        };
        let plan = || {
            let originals: HashMap<String, Vec<String>> = identified
                .pii_spans
                .iter()
                .map(|s| (s.id.clone(), identified.span_phrase(s)))
                .collect();
            plan_turn(redacted, &conv.id, Some(&originals), &self.generator).map_err(|e| e.to_string())
        };
        let opts = self.opts;
        Ok(match opts.strategy {
            Strategy::BaselineId => keep(excerpt(identified, &self.audio[ci]).map_err(|e| e.to_string())?, None, None),
            Strategy::BaselineTurn => Step::Drop {
                status: TurnStatus::Dropped,
                splice: None,
            },
            Strategy::BaselineToken => {
                let (mut turn, audio) = excerpt(redacted, host).map_err(|e| e.to_string())?;
                turn.pii_spans.clear();
                keep((turn, audio), None, None)
            }
            Strategy::TtsToken => {
                let plan = plan()?;
                let out = assemble_tts_token_turn(
                    redacted,
                    &plan,
                    opts.synthesizer,
                    &opts.tts.voices,
                    self.turn_seed(b"voice", &conv.id, ti),
                    host.as_ref(),
                )
                .map_err(|e| e.to_string())?;
                keep(assembled_turn(redacted, out.assembled, Alignment::Forced), Some(out.voice.id), None)
            }
            Strategy::TtsTurn => {
                let plan = plan()?;
                let out = assemble_tts_turn::<f32>(
                    redacted,
                    &plan,
                    opts.synthesizer,
                    &opts.tts.voices,
                    self.turn_seed(b"voice", &conv.id, ti),
                )
                .map_err(|e| e.to_string())?;
                keep(assembled_turn(redacted, out.assembled, Alignment::Synthetic), Some(out.voice.id), None)
            }
            Strategy::SplicedSd | Strategy::SplicedSp => {
                let plan = plan()?;
                let ctx = SpliceContext {
                    conversation_id: &conv.id,
                    turn_index: ti,
                    strategy: opts.strategy.splice().expect("splice strategy"),
                    index: &self.index,
                    sources: &self.redacted_audio,
                    miss_policy: opts.miss_policy,
                    seed: opts.seed,
                };
                let out = assemble_spliced_turn(redacted, &plan, host.as_ref(), &ctx).map_err(|e| e.to_string())?;
                match out.assembled {
                    Some(a) => keep(assembled_turn(redacted, a, Alignment::Forced), None, Some(out.outcome)),
                    None => Step::Drop {
                        status: match out.outcome.status {
                            SpliceStatus::SkippedTurn => TurnStatus::Skipped,
                            _ => TurnStatus::Empty,
                        },
                        splice: Some(out.outcome),
                    },
                }
            }
        })
    }

    fn process_turn(&self, ci: usize, ti: usize) -> TurnResult {
        let conv = &self.corpus[ci];
        let turn = &conv.turns[ti];
        let has_pii = turn.has_pii();
        let step = if has_pii {
            self.process_pii_turn(ci, ti)
        } else {
            excerpt(turn, &self.audio[ci])
                .map(|(turn, audio)| Step::Keep {
                    turn,
                    audio,
                    voice: None,
                    splice: None,
                })
                .map_err(|e| e.to_string())
        };
        let outcome = |status, reason: Option<String>, voice, splice| TurnOutcome {
            conversation: conv.id.clone(),
            turn: ti,
            status,
            reason,
            voice,
            splice,
        };
        match step {
            Err(reason) => TurnResult {
                record: None,
                outcome: Some(outcome(TurnStatus::Excluded, Some(reason), None, None)),
            },
            Ok(Step::Drop { status, splice }) => TurnResult {
                record: None,
                outcome: Some(outcome(status, None, None, splice)),
            },
            Ok(Step::Keep { turn, voice, splice, .. }) if turn.tokens.is_empty() => TurnResult {
                record: None,
                outcome: Some(outcome(TurnStatus::Empty, None, voice, splice)),
            },
            Ok(Step::Keep {
                turn,
                audio,
                voice,
                splice,
            }) => {
                if self.opts.strategy != Strategy::BaselineId {
                    let words: Vec<String> =
                        turn.tokens.iter().map(Token::normalized).filter(|w| !w.is_empty()).collect();
                    if find_phrase(&words, &self.guard, &self.guard_lengths).is_some() {
                        return TurnResult {
                            record: None,
                            outcome: Some(outcome(
                                TurnStatus::Excluded,
                                Some("output would contain an original PII phrase".into()),
                                voice,
                                splice,
                            )),
                        };
                    }
                }
                let id = format!("{}_{}", conv.id, ti);
                let record = Conversation {
                    audio: PathBuf::from(format!("audio/{id}.wav")),
                    id,
                    sample_rate: audio.sample_rate(),
                    turns: vec![turn],
                };
                TurnResult {
                    record: Some((record, audio)),
                    outcome: has_pii.then(|| outcome(TurnStatus::Kept, None, voice, splice)),
                }
            }
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    fs::write(path, bytes).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Builds one strategy's corpus into `<out_root>/<strategy>/`.
pub fn build(corpus: &[Conversation], opts: &BuildOptions<'_>, out_root: &Path) -> Result<BuildResult, PipelineError> {
    let stats = corpus_stats(corpus)?;
    let input_digest = input_digest(corpus)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| PipelineError::Workers(e.to_string()))?;

    let results: Vec<Vec<TurnResult>> = pool.install(|| -> Result<_, PipelineError> {
        let audio: Vec<Arc<AudioBuffer>> = corpus
            .par_iter()
            .map(|c| {
                read_wav::<f32>(&c.audio).map(Arc::new).map_err(|source| PipelineError::Audio {
                    conversation: c.id.clone(),
                    source,
                })
            })
            .collect::<Result<_, _>>()?;
        let redacted: Vec<_> = corpus
            .par_iter()
            .zip(&audio)
            .map(|(c, a)| redact(c, a))
            .collect::<Result<_, _>>()?;
        let mut redacted_audio = HashMap::new();
        let mut transcripts = Vec::with_capacity(redacted.len());
        for r in redacted {
            redacted_audio.insert(r.conversation.id.clone(), Arc::new(r.audio));
            transcripts.push(r.conversation);
        }
        let guard = audit_phrases(corpus);
        let guard_lengths = guard.iter().map(Vec::len).collect::<BTreeSet<_>>().into_iter().collect();
        let generator = SurrogateGenerator::new(
            opts.lexicon,
            SurrogateConfig {
                seed: opts.seed,
                ..opts.surrogate.clone()
            },
        )
        .with_exclusions(Exclusions::new(guard.iter()));
        let ctx = Ctx {
            corpus,
            audio,
            index: match opts.strategy.splice() {
                Some(_) => build_index(&transcripts),
                None => SpliceIndex::default(),
            },
            redacted: transcripts,
            redacted_audio,
            generator,
            guard,
            guard_lengths,
            opts,
        };
        Ok(corpus
            .par_iter()
            .enumerate()
            .map(|(ci, c)| (0..c.turns.len()).map(|ti| ctx.process_turn(ci, ti)).collect())
            .collect())
    })?;

    let dir = out_root.join(opts.strategy.name());
    let audio_dir = dir.join("audio");
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PipelineError::Io { path, source }
    };
    if audio_dir.exists() {
        fs::remove_dir_all(&audio_dir).map_err(io(&audio_dir))?;
    }
    fs::create_dir_all(&audio_dir).map_err(io(&audio_dir))?;

    let mut output = Vec::new();
    let mut outcomes = Vec::new();
    let mut wavs = Vec::new();
    for r in results.into_iter().flatten() {
        if let Some((record, audio)) = r.record {
            let bytes = encode_wav(&audio).map_err(|source| PipelineError::Audio {
                conversation: record.id.clone(),
                source,
            })?;
            write_file(&dir.join(&record.audio), &bytes)?;
            wavs.push(bytes);
            output.push(record);
        }
        outcomes.extend(r.outcome);
    }

    let manifest = manifest_string(&output);
    write_file(&dir.join("manifest.jsonl"), manifest.as_bytes())?;
    let mut log = String::new();
    for o in &outcomes {
        log.push_str(&serde_json::to_string(o).expect("outcome serializes"));
        log.push('\n');
    }
    write_file(&dir.join("outcomes.jsonl"), log.as_bytes())?;

    let mut h = Sha256::new();
    h.update(manifest.as_bytes());
    for w in &wavs {
        h.update(w);
    }
    let output_tokens: usize = output.iter().map(Conversation::token_count).sum();
    let output_pii = output
        .iter()
        .flat_map(|c| &c.turns)
        .flat_map(|t| &t.tokens)
        .filter(|t| t.pii.is_some())
        .count();
    let splice_outcomes: Vec<&SpliceOutcome> = outcomes.iter().filter_map(|o| o.splice.as_ref()).collect();
    let report = BuildReport {
        strategy: opts.strategy,
        model: opts.strategy.model_id().into(),
        seed: opts.seed,
        config_digest: opts.config_digest(),
        input_digest,
        output_digest: hex::encode(h.finalize()),
        input_conversations: corpus.len(),
        input_turns: corpus.iter().map(|c| c.turns.len()).sum(),
        input_tokens: stats.token_count,
        output_turns: output.len(),
        output_tokens,
        pii_fraction_before: stats.pii_token_fraction,
        pii_fraction_after: if output_tokens == 0 {
            0.0
        } else {
            output_pii as f64 / output_tokens as f64
        },
        excluded_turns: outcomes.iter().filter(|o| o.status == TurnStatus::Excluded).count(),
        splice_efficiency: opts.strategy.splice().map(|_| efficiency_stats(splice_outcomes)),
        manifest: "manifest.jsonl".into(),
        outcome_log: "outcomes.jsonl".into(),
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&dir.join("report.json"), format!("{json}\n").as_bytes())?;
    Ok(BuildResult {
        report,
        outcomes,
        output,
        dir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Category, PiiSpan, SpeakerId, SpeakerRole};

    fn turn(words: &[(&str, bool)], spans: Vec<PiiSpan>) -> Turn {
        let tokens = words
            .iter()
            .enumerate()
            .map(|(i, (w, pii))| {
                let t = Token::new(*w, i as u64 * 100, i as u64 * 100 + 90);
                if *pii {
                    t.with_pii(format!("s{i}"))
                } else {
                    t
                }
            })
            .collect();
        let mut t = Turn::new(
            SpeakerId {
                role: SpeakerRole::Doctor,
                tag: "d".into(),
            },
            tokens,
        );
        t.pii_spans = spans;
        t
    }

    fn span(i: usize) -> PiiSpan {
        PiiSpan {
            id: format!("s{i}"),
            category: Category::PersonName,
            first_token: i,
            last_token: i,
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
            assert_eq!(serde_json::to_value(s).unwrap(), s.name());
        }
        assert_eq!("S2".parse::<Strategy>().unwrap(), Strategy::SplicedSp);
    }

    #[test]
    fn audit_skips_public_phrases() {
        let corpus = vec![Conversation {
            id: "c".into(),
            audio: "c.wav".into(),
            sample_rate: 16_000,
            turns: vec![
                turn(&[("hi", false), ("grace", true), ("bob", true)], vec![span(1), span(2)]),
                turn(&[("amazing", false), ("grace", false)], vec![]),
            ],
        }];
        let phrases = audit_phrases(&corpus);
        assert_eq!(phrases, BTreeSet::from([vec!["bob".to_string()]]));
        let mut leaked = corpus.clone();
        leaked[0].turns[1].tokens[0].text = "Bob,".into();
        let v = verify_privacy(&leaked, &phrases);
        assert!(v.iter().any(|v| v.turn == 1 && v.phrase == "bob"));
    }
}
