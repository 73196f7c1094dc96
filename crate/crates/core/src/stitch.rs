//! Rebuilding a turn from original audio segments and replacement pieces.
//!
//! Both the splicing and the TTS-token strategies cut the host turn at its
//! tombstones, keep the original audio between them and insert a
//! replacement piece (or nothing) for each tombstone. Token timings are
//! carried in samples and converted to milliseconds once at the end.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::audio::{concat, samples_to_ms, AudioBuffer, AudioError, TimeInterval};
use crate::corpus::{Token, Turn};
use crate::num::Sample;

/// Where a stretch of output samples came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentSource {
    /// Unmodified samples of the host conversation audio.
    Host { range: Range<usize> },
    /// Corpus snippet, after trimming, scaled by `gain` and clipped.
    Snippet {
        conversation_id: String,
        range: Range<usize>,
        gain: f64,
    },
    /// Synthesized audio, after trimming, scaled by `gain` and clipped.
    Synthesized { text: String, voice: String, gain: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub output: Range<usize>,
    pub source: SegmentSource,
}

/// A replacement for one tombstone: its audio parts and, for each
/// surrogate word, the sample range it occupies in the concatenated parts.
#[derive(Debug, Clone)]
pub struct Piece<S: Sample> {
    pub parts: Vec<(AudioBuffer<S>, SegmentSource)>,
    pub words: Vec<(String, Range<usize>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledTurn<S: Sample> {
    pub audio: AudioBuffer<S>,
    /// Tokens with intervals relative to the start of `audio`.
    pub tokens: Vec<Token>,
    pub provenance: Vec<Provenance>,
}

/// Cuts `turn` out of `host` and replaces each tombstone, in temporal
/// order, by the matching entry of `pieces` (`None` drops the gap).
pub fn stitch<S: Sample>(
    turn: &Turn,
    host: &AudioBuffer<S>,
    pieces: Vec<Option<Piece<S>>>,
) -> Result<AssembledTurn<S>, AudioError> {
    let rate = host.sample_rate();
    let extent = turn.extent().ok_or(AudioError::EmptyBuffer)?;
    let host_range = extent.to_samples(rate);
    if host_range.end > host.len() {
        return Err(AudioError::OutOfRange {
            start_ms: extent.start_ms,
            end_ms: extent.end_ms,
            duration_ms: host.duration_ms(),
        });
    }
    let mut tombstones: Vec<_> = turn.tombstones.iter().collect();
    tombstones.sort_by_key(|t| t.interval);
    debug_assert_eq!(tombstones.len(), pieces.len());

    let mut buffers: Vec<AudioBuffer<S>> = Vec::new();
    let mut provenance = Vec::new();
    let mut out_len = 0usize;
    // (host range, output offset) of every kept host segment
    let mut host_segments: Vec<(Range<usize>, usize)> = Vec::new();
    // (word, output range) of every inserted word
    let mut inserted: Vec<(String, Range<usize>)> = Vec::new();

    let mut push_host = |range: Range<usize>,
                         buffers: &mut Vec<AudioBuffer<S>>,
                         provenance: &mut Vec<Provenance>,
                         out_len: &mut usize|
     -> Result<(), AudioError> {
        if range.is_empty() {
            return Ok(());
        }
        buffers.push(host.slice_samples(range.clone())?);
        provenance.push(Provenance {
            output: *out_len..*out_len + range.len(),
            source: SegmentSource::Host {
                range: range.clone(),
            },
        });
        host_segments.push((range.clone(), *out_len));
        *out_len += range.len();
        Ok(())
    };

    let mut cursor = host_range.start;
    for (t, piece) in tombstones.iter().zip(pieces) {
        let gap = t.interval.to_samples(rate);
        push_host(cursor..gap.start, &mut buffers, &mut provenance, &mut out_len)?;
        if let Some(piece) = piece {
            let base = out_len;
            for (buf, source) in piece.parts {
                if buf.sample_rate() != rate {
                    return Err(AudioError::RateMismatch {
                        expected: rate,
                        found: buf.sample_rate(),
                    });
                }
                provenance.push(Provenance {
                    output: out_len..out_len + buf.len(),
                    source,
                });
                out_len += buf.len();
                buffers.push(buf);
            }
            inserted.extend(
                piece
                    .words
                    .into_iter()
                    .map(|(w, r)| (w, base + r.start..base + r.end)),
            );
        }
        cursor = gap.end;
    }
    push_host(cursor..host_range.end, &mut buffers, &mut provenance, &mut out_len)?;

    let mut placed: Vec<(Range<usize>, String)> = Vec::new();
    for tok in &turn.tokens {
        let r = tok.interval.to_samples(rate);
        let (seg, offset) = host_segments
            .iter()
            .find(|(seg, _)| seg.start <= r.start && r.end <= seg.end)
            .expect("tokens lie outside tombstones");
        placed.push((
            offset + (r.start - seg.start)..offset + (r.end - seg.start),
            tok.text.clone(),
        ));
    }
    placed.extend(inserted.into_iter().map(|(w, r)| (r, w)));
    placed.sort_by_key(|(r, _)| r.start);

    let audio = if buffers.is_empty() {
        AudioBuffer::silence(0, rate)?
    } else {
        concat(&buffers)?
    };
    Ok(AssembledTurn {
        tokens: tokens_from_samples(&placed, rate),
        audio,
        provenance,
    })
}

/// Converts sample ranges to millisecond tokens, keeping every interval
/// non-empty and the sequence non-overlapping.
pub fn tokens_from_samples(placed: &[(Range<usize>, String)], rate: u32) -> Vec<Token> {
    let mut out: Vec<Token> = Vec::with_capacity(placed.len());
    let mut floor = 0u64;
    for (r, text) in placed {
        let start = samples_to_ms(r.start, rate).max(floor);
        let end = samples_to_ms(r.end, rate).max(start + 1);
        out.push(Token {
            text: text.clone(),
            interval: TimeInterval {
                start_ms: start,
                end_ms: end,
            },
            pii: None,
        });
        floor = end;
    }
    out
}
