//! Speech corpus de-identification and PII recovery.
//!
//! The crate turns a PII-annotated, forced-aligned conversation corpus into
//! training corpora where PII has been removed (silenced) or replaced by
//! category-consistent surrogates whose audio comes from a speech
//! synthesizer or from word snippets spliced out of the corpus itself. It
//! also scores recognizer output with WER, WDER and per-category F1.
//!
//! Modules, bottom-up:
//!
//! * [`audio`]: PCM buffers, WAV I/O, slicing, RMS matching, silence trimming
//! * [`corpus`]: the annotated data model, manifest I/O and corpus statistics
//! * [`deid`]: redaction and the two removal baselines
//! * [`surrogate`]: seeded, category-preserving replacement phrases
//! * [`splice`]: occurrence index and spliced turn assembly
//! * [`tts`]: synthesizer contract, offline stub, HTTP adapter, TTS assembly
//! * [`pipeline`]: per-strategy corpus builds and the privacy audit
//! * [`eval`]: word alignment and the scoring metrics
//! * [`cli`]: the `deidforge` command line

pub mod audio;
pub mod cli;
pub mod corpus;
pub mod deid;
pub mod eval;
pub mod num;
pub mod pipeline;
pub mod seed;
pub mod splice;
pub mod stitch;
pub mod surrogate;
pub mod tts;

pub use num::Sample;

/// Audio buffer with `f32` samples, the representation used by corpus builds.
pub type AudioBuffer = audio::AudioBuffer<f32>;
/// Audio buffer with `f64` samples.
pub type AudioBuffer64 = audio::AudioBuffer<f64>;
/// Redacted conversation carrying `f32` audio.
pub type RedactedConversation = deid::RedactedConversation<f32>;
