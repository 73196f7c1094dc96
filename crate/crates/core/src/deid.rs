//! Redaction: PII tokens leave the transcript, their audio becomes silence.
//!
//! Each removed span is kept as a [`Tombstone`] (id, category, interval,
//! token count) so later recovery strategies can fill the gap without ever
//! seeing the original text.

use thiserror::Error;

use crate::audio::{AudioBuffer, AudioError};
use crate::corpus::{Conversation, Tombstone, Turn};
use crate::num::Sample;

#[derive(Debug, Error)]
pub enum DeidError {
    #[error("conversation {conversation}, turn {turn}: span {span} lies outside the audio")]
    IntervalOutOfAudio {
        conversation: String,
        turn: usize,
        span: String,
    },
    #[error("conversation {conversation}: audio is {found} Hz, manifest says {expected} Hz")]
    RateMismatch {
        conversation: String,
        expected: u32,
        found: u32,
    },
}

/// A conversation after redaction, with its silenced audio.
#[derive(Debug, Clone, PartialEq)]
pub struct RedactedConversation<S: Sample> {
    pub conversation: Conversation,
    pub audio: AudioBuffer<S>,
}

/// Removes PII tokens from one turn, recording each span as a tombstone.
/// Turns without PII are returned unchanged.
pub fn redact_turn(turn: &Turn) -> Turn {
    if !turn.has_pii() {
        return turn.clone();
    }
    let mut out = turn.clone();
    out.tokens.retain(|t| t.pii.is_none());
    out.tombstones.extend(turn.pii_spans.iter().map(|span| Tombstone {
        id: span.id.clone(),
        category: span.category.clone(),
        interval: turn.span_interval(span),
        token_count: span.last_token - span.first_token + 1,
    }));
    out.tombstones.sort_by_key(|t| t.interval);
    out.pii_spans.clear();
    out
}

/// Transcript-only redaction of a conversation.
pub fn redact_transcript(conversation: &Conversation) -> Conversation {
    Conversation {
        turns: conversation.turns.iter().map(redact_turn).collect(),
        ..conversation.clone()
    }
}

/// Redacts transcript and audio. Each span's interval, from its first
/// token's start to its last token's end, is zeroed; nothing else changes.
pub fn redact<S: Sample>(
    conversation: &Conversation,
    audio: &AudioBuffer<S>,
) -> Result<RedactedConversation<S>, DeidError> {
    if audio.sample_rate() != conversation.sample_rate {
        return Err(DeidError::RateMismatch {
            conversation: conversation.id.clone(),
            expected: conversation.sample_rate,
            found: audio.sample_rate(),
        });
    }
    let mut silenced = audio.clone();
    for (i, turn) in conversation.turns.iter().enumerate() {
        for span in &turn.pii_spans {
            let interval = turn.span_interval(span);
            silenced
                .silence_fill_in_place(&interval)
                .map_err(|e| match e {
                    AudioError::OutOfRange { .. } | AudioError::InvalidInterval { .. } => {
                        DeidError::IntervalOutOfAudio {
                            conversation: conversation.id.clone(),
                            turn: i,
                            span: span.id.clone(),
                        }
                    }
                    other => unreachable!("silence fill only fails on range: {other}"),
                })?;
        }
    }
    Ok(RedactedConversation {
        conversation: redact_transcript(conversation),
        audio: silenced,
    })
}

/// Drops every turn that contains a PII span. Conversations left without
/// turns are dropped too.
pub fn build_baseline_turn(corpus: &[Conversation]) -> Vec<Conversation> {
    corpus
        .iter()
        .filter_map(|c| {
            let turns: Vec<Turn> = c.turns.iter().filter(|t| !t.has_pii()).cloned().collect();
            (!turns.is_empty()).then(|| Conversation {
                turns,
                ..c.clone()
            })
        })
        .collect()
}

/// Removes PII tokens and keeps the rest of every turn (transcript side of
/// [`redact`]).
pub fn build_baseline_token(corpus: &[Conversation]) -> Vec<Conversation> {
    corpus.iter().map(redact_transcript).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{ms_to_samples, TimeInterval};
    use crate::corpus::{Category, PiiSpan, SpeakerId, SpeakerRole, Token};

    fn fixture() -> (Conversation, AudioBuffer<f32>) {
        let mut turn = Turn::new(
            SpeakerId {
                role: SpeakerRole::Doctor,
                tag: "dr".into(),
            },
            vec![
                Token::new("see", 200, 600),
                Token::new("michael", 1000, 1500).with_pii("p1"),
                Token::new("tomorrow", 1600, 1900),
            ],
        );
        turn.pii_spans.push(PiiSpan {
            id: "p1".into(),
            category: Category::PersonName,
            first_token: 1,
            last_token: 1,
        });
        let conv = Conversation {
            id: "c".into(),
            audio: "c.wav".into(),
            sample_rate: 16_000,
            turns: vec![turn],
        };
        let samples = (0..32_000).map(|i| ((i % 97) as f32 - 48.0) / 100.0).collect();
        (conv, AudioBuffer::new(samples, 16_000).unwrap())
    }

    #[test]
    fn single_token_redaction() {
        let (conv, audio) = fixture();
        let r = redact(&conv, &audio).unwrap();
        let range = ms_to_samples(1000, 16_000)..ms_to_samples(1500, 16_000);
        assert!(r.audio.samples()[range.clone()].iter().all(|&s| s == 0.0));
        assert_eq!(&r.audio.samples()[..range.start], &audio.samples()[..range.start]);
        assert_eq!(&r.audio.samples()[range.end..], &audio.samples()[range.end..]);
        let turn = &r.conversation.turns[0];
        assert_eq!(turn.words(), vec!["see", "tomorrow"]);
        assert!(turn.pii_spans.is_empty());
        assert_eq!(turn.tombstones.len(), 1);
        assert_eq!(turn.tombstones[0].interval, TimeInterval::new(1000, 1500).unwrap());
        assert_eq!(turn.tombstones[0].category, Category::PersonName);
        assert_eq!(turn.tombstones[0].token_count, 1);
        assert!(r.conversation.validate().is_empty());
    }

    #[test]
    fn no_pii_is_identity() {
        let (mut conv, audio) = fixture();
        conv.turns[0].tokens[1].pii = None;
        conv.turns[0].pii_spans.clear();
        let r = redact(&conv, &audio).unwrap();
        assert_eq!(r.conversation, conv);
        assert_eq!(r.audio, audio);
    }

    #[test]
    fn out_of_audio_span_errors() {
        let (conv, audio) = fixture();
        let short = audio.slice_samples(0..ms_to_samples(1200, 16_000)).unwrap();
        assert!(matches!(
            redact(&conv, &short),
            Err(DeidError::IntervalOutOfAudio { turn: 0, .. })
        ));
    }

    #[test]
    fn baselines() {
        let (conv, _) = fixture();
        assert!(build_baseline_turn(std::slice::from_ref(&conv)).is_empty());
        let b3 = build_baseline_token(std::slice::from_ref(&conv));
        assert_eq!(b3[0].turns.len(), 1);
        assert_eq!(b3[0].turns[0].tokens.len(), 2);
    }
}
