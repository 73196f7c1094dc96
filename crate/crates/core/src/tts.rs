//! Synthesized audio for surrogates.
//!
//! TOKEN mode synthesizes only the surrogate words and stitches them into
//! the original turn; TURN mode re-synthesizes the whole turn. The
//! [`Synthesizer`] trait is the engine contract. [`StubSynthesizer`] is a
//! deterministic tone generator for offline runs and [`HttpSynthesizer`]
//! talks to an external engine.

use std::ops::Range;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{
    decode_wav, ms_to_samples, trim_bounds, AudioBuffer, AudioError, TimeInterval,
    DEFAULT_FRAME_MS, DEFAULT_THRESHOLD_DBFS,
};
use crate::corpus::{proportional_alignment, Token, Turn};
use crate::num::Sample;
use crate::seed;
use crate::stitch::{stitch, tokens_from_samples, AssembledTurn, Piece, Provenance, SegmentSource};
use crate::surrogate::ReplacementPlan;

#[derive(Debug, Error)]
pub enum TtsError {
    #[error("nothing to synthesize")]
    EmptyText,
    #[error("synthesis of {text:?} failed: {message}")]
    SynthFailure { text: String, message: String },
    #[error("synthesizer returned {found} Hz audio for a {expected} Hz turn")]
    RateMismatch { expected: u32, found: u32 },
    #[error("synthesizer request timed out")]
    Timeout,
    #[error("synthesizer answered with HTTP status {0}")]
    BadStatus(u16),
    #[error("undecodable synthesizer response: {0}")]
    DecodeError(String),
    #[error("synthesizer transport error: {0}")]
    Transport(String),
    #[error("voice pool is empty")]
    NoVoices,
    #[error("plan does not match the turn's tombstones")]
    PlanMismatch,
    #[error(transparent)]
    Audio(#[from] AudioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Voice {
    pub id: String,
    pub gender: Gender,
}

/// Eleven English voices, four male and seven female.
pub fn default_voices() -> Vec<Voice> {
    let male = (1..=4).map(|i| Voice {
        id: format!("en-m{i}"),
        gender: Gender::Male,
    });
    let female = (1..=7).map(|i| Voice {
        id: format!("en-f{i}"),
        gender: Gender::Female,
    });
    male.chain(female).collect()
}

/// Uniform, seeded choice of one voice.
pub fn choose_voice(pool: &[Voice], voice_seed: u64) -> Result<&Voice, TtsError> {
    if pool.is_empty() {
        return Err(TtsError::NoVoices);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(voice_seed);
    Ok(&pool[rng.random_range(0..pool.len())])
}

/// Synthesizer output. `word_timings`, when present, holds one sample range
/// per whitespace-separated word of the input text.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub audio: AudioBuffer<f64>,
    pub word_timings: Option<Vec<Range<usize>>>,
}

pub trait Synthesizer: Sync {
    fn sample_rate(&self) -> u32;
    fn synthesize(&self, text: &str, voice: &Voice) -> Result<Synthesis, TtsError>;
}

pub const STUB_SAMPLE_RATE: u32 = 16_000;
pub const STUB_CHAR_MS: u64 = 60;
pub const STUB_GAP_MS: u64 = 10;
const STUB_AMPLITUDE: f64 = 0.3;

/// Offline test double: every character becomes a 60 ms sine tone whose
/// frequency depends only on the character and the voice; words are
/// separated by 10 ms of silence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StubSynthesizer {
    rate: u32,
}

impl Default for StubSynthesizer {
    fn default() -> Self {
        Self {
            rate: STUB_SAMPLE_RATE,
        }
    }
}

impl StubSynthesizer {
    pub fn with_rate(rate: u32) -> Self {
        Self { rate }
    }

    fn frequency(c: char, voice: &Voice) -> f64 {
        let mut buf = [0u8; 4];
        let h = seed::derive(0, &[b"stub-tone", voice.id.as_bytes(), c.encode_utf8(&mut buf).as_bytes()]);
        200.0 + (h % 1800) as f64
    }
}

impl Synthesizer for StubSynthesizer {
    fn sample_rate(&self) -> u32 {
        self.rate
    }

    fn synthesize(&self, text: &str, voice: &Voice) -> Result<Synthesis, TtsError> {
        stub_synthesize(text, voice, self.rate)
    }
}

pub fn stub_synthesize(text: &str, voice: &Voice, rate: u32) -> Result<Synthesis, TtsError> {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.is_empty() {
        return Err(TtsError::EmptyText);
    }
    let char_len = ms_to_samples(STUB_CHAR_MS, rate);
    let gap_len = ms_to_samples(STUB_GAP_MS, rate);
    let mut samples = Vec::new();
    let mut timings = Vec::with_capacity(words.len());
    for (i, word) in words.iter().enumerate() {
        if i > 0 {
            samples.resize(samples.len() + gap_len, 0.0);
        }
        let start = samples.len();
        for c in word.chars() {
            let step = 2.0 * std::f64::consts::PI * StubSynthesizer::frequency(c, voice) / rate as f64;
            samples.extend((0..char_len).map(|n| STUB_AMPLITUDE * (step * (n as f64 + 0.5)).sin()));
        }
        timings.push(start..samples.len());
    }
    Ok(Synthesis {
        audio: AudioBuffer::new(samples, rate)?,
        word_timings: Some(timings),
    })
}

fn synth_checked(
    synth: &dyn Synthesizer,
    text: &str,
    voice: &Voice,
    rate: u32,
) -> Result<Synthesis, TtsError> {
    let out = synth.synthesize(text, voice).map_err(|e| match e {
        TtsError::EmptyText => TtsError::EmptyText,
        other => TtsError::SynthFailure {
            text: text.to_string(),
            message: other.to_string(),
        },
    })?;
    if out.audio.is_empty() {
        return Err(TtsError::SynthFailure {
            text: text.to_string(),
            message: "empty audio".into(),
        });
    }
    if out.audio.sample_rate() != rate {
        return Err(TtsError::RateMismatch {
            expected: rate,
            found: out.audio.sample_rate(),
        });
    }
    Ok(out)
}

/// Word sample ranges for `words` within `len` samples: the synthesizer's
/// own timings when they fit, proportional to character count otherwise.
fn word_ranges(
    words: &[&str],
    timings: Option<&[Range<usize>]>,
    window: Range<usize>,
) -> Vec<Range<usize>> {
    if let Some(t) = timings.filter(|t| t.len() == words.len()) {
        return t
            .iter()
            .map(|r| {
                let s = r.start.clamp(window.start, window.end) - window.start;
                let e = r.end.clamp(window.start, window.end) - window.start;
                s..e.max(s)
            })
            .collect();
    }
    let len = window.len();
    let total: usize = words.iter().map(|w| w.chars().count().max(1)).sum();
    let mut acc = 0usize;
    words
        .iter()
        .map(|w| {
            let s = len * acc / total;
            acc += w.chars().count().max(1);
            s..len * acc / total
        })
        .collect()
}

/// Result of a TTS assembly, with the voice used for the whole turn.
#[derive(Debug, Clone, PartialEq)]
pub struct TtsAssembly<S: Sample> {
    pub assembled: AssembledTurn<S>,
    pub voice: Voice,
}

fn check_plan(turn: &Turn, plan: &ReplacementPlan) -> Result<(), TtsError> {
    let mut ids: Vec<_> = turn.tombstones.iter().collect();
    ids.sort_by_key(|t| t.interval);
    let matches = ids.len() == plan.entries.len()
        && ids.iter().zip(&plan.entries).all(|(t, e)| t.id == e.tombstone_id);
    if matches {
        Ok(())
    } else {
        Err(TtsError::PlanMismatch)
    }
}

/// TOKEN mode: each tombstone gap is replaced by the synthesized surrogate,
/// trimmed and then level-matched to the host turn's active RMS. All other
/// samples come from `host` unchanged.
pub fn assemble_tts_token_turn<S: Sample>(
    turn: &Turn,
    plan: &ReplacementPlan,
    synth: &dyn Synthesizer,
    voices: &[Voice],
    voice_seed: u64,
    host: &AudioBuffer<S>,
) -> Result<TtsAssembly<S>, TtsError> {
    check_plan(turn, plan)?;
    let voice = choose_voice(voices, voice_seed)?;
    let rate = host.sample_rate();
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

    let mut pieces = Vec::with_capacity(plan.entries.len());
    for entry in &plan.entries {
        let text = entry.surrogate.join(" ");
        let out = synth_checked(synth, &text, voice, rate)?;
        let audio: AudioBuffer<S> = out.audio.convert();
        let keep = trim_bounds(&audio, DEFAULT_THRESHOLD_DBFS, DEFAULT_FRAME_MS);
        if keep.is_empty() {
            return Err(TtsError::SynthFailure {
                text,
                message: "silent synthesis".into(),
            });
        }
        let trimmed = audio.slice_samples(keep.clone())?;
        let (buffer, gain) = if host_level > S::zero() {
            let m = trimmed.match_rms(host_level)?;
            (m.buffer, m.gain)
        } else {
            (trimmed, 1.0)
        };
        let words: Vec<&str> = text.split_whitespace().collect();
        let ranges = word_ranges(&words, out.word_timings.as_deref(), keep);
        pieces.push(Some(Piece {
            words: words.iter().map(|w| w.to_string()).zip(ranges).collect(),
            parts: vec![(
                buffer,
                SegmentSource::Synthesized {
                    text: text.clone(),
                    voice: voice.id.clone(),
                    gain,
                },
            )],
        }));
    }
    Ok(TtsAssembly {
        assembled: stitch(turn, host, pieces)?,
        voice: voice.clone(),
    })
}

/// The turn's words in temporal order with surrogates in place of the
/// tombstones.
pub fn surrogate_words(turn: &Turn, plan: &ReplacementPlan) -> Vec<String> {
    let mut items: Vec<(u64, usize, Vec<String>)> = turn
        .tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.interval.start_ms, i, vec![t.text.clone()]))
        .collect();
    items.extend(
        plan.entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.interval.start_ms, usize::MAX - plan.entries.len() + i, e.surrogate.clone())),
    );
    items.sort_by_key(|(start, order, _)| (*start, *order));
    items.into_iter().flat_map(|(_, _, w)| w).collect()
}

/// TURN mode: the whole turn text, surrogates included, is synthesized
/// with one voice. Nothing of the original audio remains. Token timings
/// come from the synthesizer, or proportionally by character count.
pub fn assemble_tts_turn<S: Sample>(
    turn: &Turn,
    plan: &ReplacementPlan,
    synth: &dyn Synthesizer,
    voices: &[Voice],
    voice_seed: u64,
) -> Result<TtsAssembly<S>, TtsError> {
    if plan.is_empty() {
        return Err(TtsError::PlanMismatch);
    }
    check_plan(turn, plan)?;
    let voice = choose_voice(voices, voice_seed)?;
    let words = surrogate_words(turn, plan);
    let text = words.join(" ");
    let out = synth_checked(synth, &text, voice, synth.sample_rate())?;
    let audio: AudioBuffer<S> = out.audio.convert();
    let rate = audio.sample_rate();
    let split: Vec<&str> = text.split_whitespace().collect();
    let tokens = match out.word_timings.as_deref().filter(|t| t.len() == split.len()) {
        Some(t) => {
            let placed: Vec<_> = t.iter().cloned().zip(split.iter().map(|w| w.to_string())).collect();
            tokens_from_samples(&placed, rate)
        }
        None => {
            let whole = TimeInterval {
                start_ms: 0,
                end_ms: audio.duration_ms(),
            };
            match proportional_alignment(&split, whole) {
                Some(intervals) => split
                    .iter()
                    .zip(intervals)
                    .map(|(w, interval)| Token {
                        text: w.to_string(),
                        interval,
                        pii: None,
                    })
                    .collect(),
                None => {
                    let ranges = word_ranges(&split, None, 0..audio.len());
                    let placed: Vec<_> = ranges.into_iter().zip(split.iter().map(|w| w.to_string())).collect();
                    tokens_from_samples(&placed, rate)
                }
            }
        }
    };
    Ok(TtsAssembly {
        assembled: AssembledTurn {
            provenance: vec![Provenance {
                output: 0..audio.len(),
                source: SegmentSource::Synthesized {
                    text,
                    voice: voice.id.clone(),
                    gain: 1.0,
                },
            }],
            tokens,
            audio,
        },
        voice: voice.clone(),
    })
}

/// Settings of the `tts` config section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TtsConfig {
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
    pub retries: u32,
    pub backoff_ms: u64,
    pub max_in_flight: usize,
    pub sample_rate: u32,
    pub voices: Vec<Voice>,
}

impl Default for TtsConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            timeout_ms: 30_000,
            retries: 2,
            backoff_ms: 200,
            max_in_flight: 4,
            sample_rate: STUB_SAMPLE_RATE,
            voices: default_voices(),
        }
    }
}

#[derive(Serialize)]
struct SynthRequest<'a> {
    text: &'a str,
    voice_id: &'a str,
    sample_rate: u32,
}

/// Client for an engine that answers `POST {text, voice_id, sample_rate}`
/// with a WAV body. Failed requests (timeouts, transport errors, 429 and
/// 5xx) are retried with exponential backoff; at most `max_in_flight`
/// requests run at once.
pub struct HttpSynthesizer {
    endpoint: String,
    sample_rate: u32,
    retries: u32,
    backoff: Duration,
    max_in_flight: usize,
    agent: ureq::Agent,
    in_flight: Mutex<usize>,
    slot_freed: Condvar,
}

impl HttpSynthesizer {
    pub fn new(endpoint: impl Into<String>, config: &TtsConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            sample_rate: config.sample_rate,
            retries: config.retries,
            backoff: Duration::from_millis(config.backoff_ms),
            max_in_flight: config.max_in_flight.max(1),
            agent,
            in_flight: Mutex::new(0),
            slot_freed: Condvar::new(),
        }
    }

    fn acquire(&self) {
        let mut n = self.in_flight.lock().expect("in-flight lock");
        while *n >= self.max_in_flight {
            n = self.slot_freed.wait(n).expect("in-flight lock");
        }
        *n += 1;
    }

    fn release(&self) {
        *self.in_flight.lock().expect("in-flight lock") -= 1;
        self.slot_freed.notify_one();
    }

    fn attempt(&self, body: &str) -> Result<Vec<u8>, TtsError> {
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json")
            .send(body)
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => TtsError::Timeout,
                other => TtsError::Transport(other.to_string()),
            })?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(TtsError::BadStatus(status));
        }
        resp.body_mut()
            .with_config()
            .limit(256 * 1024 * 1024)
            .read_to_vec()
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => TtsError::Timeout,
                other => TtsError::Transport(other.to_string()),
            })
    }

    pub fn http_synthesize(&self, text: &str, voice: &Voice) -> Result<AudioBuffer<f64>, TtsError> {
        if text.trim().is_empty() {
            return Err(TtsError::EmptyText);
        }
        let body = serde_json::to_string(&SynthRequest {
            text,
            voice_id: &voice.id,
            sample_rate: self.sample_rate,
        })
        .expect("request serializes");
        self.acquire();
        let mut result = Err(TtsError::Timeout);
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
            }
            result = self.attempt(&body);
            let retry = match &result {
                Err(TtsError::Timeout | TtsError::Transport(_)) => true,
                Err(TtsError::BadStatus(code)) => *code == 429 || *code >= 500,
                _ => false,
            };
            if !retry {
                break;
            }
        }
        self.release();
        let audio = decode_wav::<f64>(&result?).map_err(|e| TtsError::DecodeError(e.to_string()))?;
        if audio.is_empty() {
            return Err(TtsError::DecodeError("empty audio".into()));
        }
        Ok(audio)
    }
}

impl Synthesizer for HttpSynthesizer {
    fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    fn synthesize(&self, text: &str, voice: &Voice) -> Result<Synthesis, TtsError> {
        Ok(Synthesis {
            audio: self.http_synthesize(text, voice)?,
            word_timings: None,
        })
    }
}
