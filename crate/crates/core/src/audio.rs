//! PCM audio primitives.
//!
//! Buffers are mono and hold samples in `[-1, 1]`. Millisecond positions are
//! converted to sample indices with round-half-up everywhere
//! ([`ms_to_samples`]), so slicing a buffer at a sequence of millisecond
//! boundaries and concatenating the pieces reproduces it exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor, Read, Seek, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{dbfs_to_amplitude, Sample};

/// Default speech-activity threshold.
pub const DEFAULT_THRESHOLD_DBFS: f64 = -40.0;
/// Default analysis frame length.
pub const DEFAULT_FRAME_MS: u32 = 10;
/// Crossfade length used when [`ConcatOptions::crossfade`] is set.
pub const CROSSFADE_MS: u64 = 5;
const MATCH_ITERATIONS: usize = 16;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("interval {start_ms}..{end_ms} ms lies outside a buffer of {duration_ms} ms")]
    OutOfRange {
        start_ms: u64,
        end_ms: u64,
        duration_ms: u64,
    },
    #[error("sample rate mismatch: expected {expected} Hz, found {found} Hz")]
    RateMismatch { expected: u32, found: u32 },
    #[error("empty buffer")]
    EmptyBuffer,
    #[error("snippet has no speech-active frames")]
    SilentSnippet,
    #[error("sample rate must be positive")]
    InvalidRate,
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("nothing to concatenate")]
    NothingToConcat,
    #[error("invalid interval: start {start_ms} ms must be before end {end_ms} ms")]
    InvalidInterval { start_ms: u64, end_ms: u64 },
}

pub type Result<T, E = AudioError> = std::result::Result<T, E>;

/// A half-open millisecond interval `[start_ms, end_ms)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeInterval {
    pub start_ms: u64,
    pub end_ms: u64,
}

impl TimeInterval {
    pub fn new(start_ms: u64, end_ms: u64) -> Result<Self> {
        if start_ms >= end_ms {
            return Err(AudioError::InvalidInterval { start_ms, end_ms });
        }
        Ok(Self { start_ms, end_ms })
    }

    pub fn duration_ms(&self) -> u64 {
        self.end_ms.saturating_sub(self.start_ms)
    }

    pub fn is_valid(&self) -> bool {
        self.start_ms < self.end_ms
    }

    /// Smallest interval covering both.
    pub fn hull(&self, other: &TimeInterval) -> TimeInterval {
        TimeInterval {
            start_ms: self.start_ms.min(other.start_ms),
            end_ms: self.end_ms.max(other.end_ms),
        }
    }

    /// Sample index range at `rate`.
    pub fn to_samples(&self, rate: u32) -> Range<usize> {
        ms_to_samples(self.start_ms, rate)..ms_to_samples(self.end_ms, rate)
    }
}

/// Milliseconds to a sample index, rounding half up.
pub fn ms_to_samples(ms: u64, rate: u32) -> usize {
    ((ms as u128 * rate as u128 + 500) / 1000) as usize
}

/// Sample index to milliseconds, rounding half up.
pub fn samples_to_ms(samples: usize, rate: u32) -> u64 {
    let rate = rate as u128;
    ((samples as u128 * 2000 + rate) / (2 * rate)) as u64
}

/// Mono PCM audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer<S: Sample> {
    samples: Vec<S>,
    sample_rate: u32,
}

impl<S: Sample> AudioBuffer<S> {
    pub fn new(samples: Vec<S>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidRate);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::NonFinite(i));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// `len` zero samples.
    pub fn silence(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![S::zero(); len], sample_rate)
    }

    pub fn samples(&self) -> &[S] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<S> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_ms(&self) -> u64 {
        samples_to_ms(self.samples.len(), self.sample_rate)
    }

    /// Samples in the index range, as a new buffer.
    pub fn slice_samples(&self, range: Range<usize>) -> Result<Self> {
        if range.start > range.end || range.end > self.samples.len() {
            return Err(AudioError::OutOfRange {
                start_ms: samples_to_ms(range.start, self.sample_rate),
                end_ms: samples_to_ms(range.end, self.sample_rate),
                duration_ms: self.duration_ms(),
            });
        }
        Ok(Self {
            samples: self.samples[range].to_vec(),
            sample_rate: self.sample_rate,
        })
    }

    fn checked_range(&self, interval: &TimeInterval) -> Result<Range<usize>> {
        let range = interval.to_samples(self.sample_rate);
        if !interval.is_valid() || range.end > self.samples.len() {
            return Err(AudioError::OutOfRange {
                start_ms: interval.start_ms,
                end_ms: interval.end_ms,
                duration_ms: self.duration_ms(),
            });
        }
        Ok(range)
    }

    /// Extracts `interval`. The sample count is
    /// `ms_to_samples(end) - ms_to_samples(start)`.
    pub fn slice(&self, interval: &TimeInterval) -> Result<Self> {
        let range = self.checked_range(interval)?;
        self.slice_samples(range)
    }

    /// Copy with every sample inside `interval` set to zero.
    pub fn silence_fill(&self, interval: &TimeInterval) -> Result<Self> {
        let mut out = self.clone();
        out.silence_fill_in_place(interval)?;
        Ok(out)
    }

    pub fn silence_fill_in_place(&mut self, interval: &TimeInterval) -> Result<()> {
        let range = self.checked_range(interval)?;
        self.samples[range].fill(S::zero());
        Ok(())
    }

    /// Root-mean-square level. With `active_only`, only frames above the
    /// default activity threshold contribute; see [`rms_with`].
    pub fn rms(&self, active_only: bool) -> Result<S> {
        let activity = active_only.then(Activity::default);
        rms_with(self, activity)
    }

    /// Scales to a target active level; see [`match_rms`].
    pub fn match_rms(&self, reference_level: S) -> Result<RmsMatch<S>> {
        match_rms(self, reference_level)
    }

    /// Trims silent edges with the default threshold and frame length.
    pub fn trim_silence(&self) -> Self {
        trim_silence(self, DEFAULT_THRESHOLD_DBFS, DEFAULT_FRAME_MS)
    }

    /// Multiplies every sample by `gain`, hard-clipping to `[-1, 1]`.
    /// Returns the clipped buffer and the number of clipped samples.
    pub fn scaled(&self, gain: f64) -> (Self, usize) {
        let g = S::from_f64_lossy(gain);
        let one = S::one();
        let mut clipped = 0;
        let samples = self
            .samples
            .iter()
            .map(|&s| {
                let v = s * g;
                if v > one {
                    clipped += 1;
                    one
                } else if v < -one {
                    clipped += 1;
                    -one
                } else {
                    v
                }
            })
            .collect();
        (
            Self {
                samples,
                sample_rate: self.sample_rate,
            },
            clipped,
        )
    }

    /// Converts the sample type.
    pub fn convert<T: Sample>(&self) -> AudioBuffer<T> {
        AudioBuffer {
            samples: self
                .samples
                .iter()
                .map(|s| T::from_f64_lossy(s.to_f64_lossy()))
                .collect(),
            sample_rate: self.sample_rate,
        }
    }
}

// ---------------------------------------------------------------------------
// WAV I/O

/// Reads a 16-bit PCM mono WAV file.
pub fn read_wav<S: Sample>(path: impl AsRef<Path>) -> Result<AudioBuffer<S>> {
    let file = File::open(path)?;
    read_wav_from(BufReader::new(file))
}

/// Decodes an in-memory WAV file.
pub fn decode_wav<S: Sample>(bytes: &[u8]) -> Result<AudioBuffer<S>> {
    read_wav_from(Cursor::new(bytes))
}

/// Reads only the header and returns `(sample_rate, sample_count)`.
pub fn wav_info(path: impl AsRef<Path>) -> Result<(u32, usize)> {
    let reader = hound::WavReader::new(BufReader::new(File::open(path)?)).map_err(hound_err)?;
    check_spec(&reader.spec())?;
    Ok((reader.spec().sample_rate, reader.duration() as usize))
}

fn read_wav_from<S: Sample, R: Read>(reader: R) -> Result<AudioBuffer<S>> {
    let mut reader = hound::WavReader::new(reader).map_err(hound_err)?;
    let spec = reader.spec();
    check_spec(&spec)?;
    let scale = 1.0 / 32768.0;
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| S::from_f64_lossy(v as f64 * scale)))
        .collect::<std::result::Result<Vec<S>, _>>()
        .map_err(hound_err)?;
    AudioBuffer::new(samples, spec.sample_rate)
}

fn check_spec(spec: &hound::WavSpec) -> Result<()> {
    if spec.channels != 1 {
        return Err(AudioError::UnsupportedFormat(format!(
            "{} channels, only mono is accepted",
            spec.channels
        )));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(AudioError::UnsupportedFormat(format!(
            "{:?} {}-bit samples, only 16-bit PCM is accepted",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    Ok(())
}

fn hound_err(e: hound::Error) -> AudioError {
    match e {
        hound::Error::IoError(io) => AudioError::Io(io),
        other => AudioError::UnsupportedFormat(other.to_string()),
    }
}

/// Quantizes one sample to 16-bit PCM (round to nearest, saturating).
pub fn quantize<S: Sample>(s: S) -> i16 {
    let v = (s.to_f64_lossy() * 32768.0).round();
    v.clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// Writes a 16-bit PCM mono WAV file.
pub fn write_wav<S: Sample>(buffer: &AudioBuffer<S>, path: impl AsRef<Path>) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    write_wav_to(buffer, file)
}

/// Encodes to an in-memory WAV file.
pub fn encode_wav<S: Sample>(buffer: &AudioBuffer<S>) -> Result<Vec<u8>> {
    let mut cursor = Cursor::new(Vec::with_capacity(44 + buffer.len() * 2));
    write_wav_to(buffer, &mut cursor)?;
    Ok(cursor.into_inner())
}

fn write_wav_to<S: Sample, W: Write + Seek>(buffer: &AudioBuffer<S>, w: W) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buffer.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::new(w, spec).map_err(hound_err)?;
    {
        let mut i16_writer = writer.get_i16_writer(buffer.len() as u32);
        for &s in &buffer.samples {
            i16_writer.write_sample(quantize(s));
        }
        i16_writer.flush().map_err(hound_err)?;
    }
    writer.finalize().map_err(hound_err)
}

// ---------------------------------------------------------------------------
// Concatenation

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConcatOptions {
    /// Overlap adjacent buffers with a 5 ms linear crossfade.
    pub crossfade: bool,
}

/// Sample-wise concatenation without crossfade.
pub fn concat<S: Sample>(buffers: &[AudioBuffer<S>]) -> Result<AudioBuffer<S>> {
    concat_with(buffers, ConcatOptions::default())
}

pub fn concat_with<S: Sample>(
    buffers: &[AudioBuffer<S>],
    options: ConcatOptions,
) -> Result<AudioBuffer<S>> {
    let first = buffers.first().ok_or(AudioError::NothingToConcat)?;
    let rate = first.sample_rate;
    if let Some(b) = buffers.iter().find(|b| b.sample_rate != rate) {
        return Err(AudioError::RateMismatch {
            expected: rate,
            found: b.sample_rate,
        });
    }
    let total = buffers.iter().map(AudioBuffer::len).sum();
    let mut samples: Vec<S> = Vec::with_capacity(total);
    let fade = if options.crossfade {
        ms_to_samples(CROSSFADE_MS, rate)
    } else {
        0
    };
    for b in buffers {
        let n = fade.min(samples.len()).min(b.len());
        if n == 0 {
            samples.extend_from_slice(&b.samples);
            continue;
        }
        let tail = samples.len() - n;
        for i in 0..n {
            let w = S::from_f64_lossy((i + 1) as f64 / (n + 1) as f64);
            let prev = samples[tail + i];
            samples[tail + i] = prev * (S::one() - w) + b.samples[i] * w;
        }
        samples.extend_from_slice(&b.samples[n..]);
    }
    Ok(AudioBuffer {
        samples,
        sample_rate: rate,
    })
}

// ---------------------------------------------------------------------------
// Levels

/// Framing parameters for speech-activity decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Activity {
    pub threshold_dbfs: f64,
    pub frame_ms: u32,
}

impl Default for Activity {
    fn default() -> Self {
        Self {
            threshold_dbfs: DEFAULT_THRESHOLD_DBFS,
            frame_ms: DEFAULT_FRAME_MS,
        }
    }
}

impl Activity {
    fn frame_len(&self, rate: u32) -> usize {
        ms_to_samples(self.frame_ms as u64, rate).max(1)
    }
}

fn sum_sq<S: Sample>(xs: &[S]) -> f64 {
    xs.iter()
        .map(|s| {
            let v = s.to_f64_lossy();
            v * v
        })
        .sum()
}

/// RMS of each analysis frame. The last frame may be partial.
pub fn frame_levels<S: Sample>(buffer: &AudioBuffer<S>, frame_ms: u32) -> Vec<f64> {
    let frame = Activity {
        threshold_dbfs: 0.0,
        frame_ms,
    }
    .frame_len(buffer.sample_rate);
    buffer
        .samples
        .chunks(frame)
        .map(|c| (sum_sq(c) / c.len() as f64).sqrt())
        .collect()
}

/// RMS over all samples, or over speech-active frames only when `activity`
/// is given. A frame is active when its RMS exceeds the threshold. Returns 0
/// when no frame is active.
pub fn rms_with<S: Sample>(buffer: &AudioBuffer<S>, activity: Option<Activity>) -> Result<S> {
    if buffer.is_empty() {
        return Err(AudioError::EmptyBuffer);
    }
    let level = match activity {
        None => (sum_sq(&buffer.samples) / buffer.len() as f64).sqrt(),
        Some(a) => {
            let thr = dbfs_to_amplitude(a.threshold_dbfs);
            let (mut acc, mut n) = (0.0, 0usize);
            for chunk in buffer.samples.chunks(a.frame_len(buffer.sample_rate)) {
                let ss = sum_sq(chunk);
                if (ss / chunk.len() as f64).sqrt() > thr {
                    acc += ss;
                    n += chunk.len();
                }
            }
            if n == 0 {
                0.0
            } else {
                (acc / n as f64).sqrt()
            }
        }
    };
    Ok(S::from_f64_lossy(level))
}

/// Result of [`match_rms`].
#[derive(Debug, Clone, PartialEq)]
pub struct RmsMatch<S: Sample> {
    pub buffer: AudioBuffer<S>,
    pub gain: f64,
    /// Fraction of samples that hit the `[-1, 1]` rails.
    pub clipped_fraction: f64,
}

/// Scales `snippet` so its active RMS equals `reference_level`, then
/// hard-clips to `[-1, 1]`.
pub fn match_rms<S: Sample>(snippet: &AudioBuffer<S>, reference_level: S) -> Result<RmsMatch<S>> {
    let current = rms_with(snippet, Some(Activity::default()))?.to_f64_lossy();
    if current <= 0.0 {
        return Err(AudioError::SilentSnippet);
    }
    let target = reference_level.to_f64_lossy();
    let mut gain = if target == current {
        1.0
    } else {
        target / current
    };
    // Scaling moves frames across the activity threshold, so the gain is
    // refined against the output's own active set.
    let (mut buffer, mut clipped) = snippet.scaled(gain);
    let mut best = (f64::INFINITY, gain);
    for _ in 0..MATCH_ITERATIONS {
        let level = rms_with(&buffer, Some(Activity::default()))?.to_f64_lossy();
        let miss = (level - target).abs();
        if miss < best.0 {
            best = (miss, gain);
        }
        if miss <= target * 1e-9 || level <= 0.0 || clipped > 0 {
            break;
        }
        gain *= target / level;
        (buffer, clipped) = snippet.scaled(gain);
    }
    if best.1 != gain {
        gain = best.1;
        (buffer, clipped) = snippet.scaled(gain);
    }
    Ok(RmsMatch {
        clipped_fraction: clipped as f64 / snippet.len() as f64,
        buffer,
        gain,
    })
}

/// Sample range left after removing the maximal leading and trailing runs of
/// frames whose RMS is below `threshold_dbfs`. Frames are laid out from the
/// start of the buffer; an all-silent buffer yields an empty range.
pub fn trim_bounds<S: Sample>(
    snippet: &AudioBuffer<S>,
    threshold_dbfs: f64,
    frame_ms: u32,
) -> Range<usize> {
    let thr = dbfs_to_amplitude(threshold_dbfs);
    let levels = frame_levels(snippet, frame_ms);
    let frame = Activity {
        threshold_dbfs,
        frame_ms,
    }
    .frame_len(snippet.sample_rate);
    let Some(first) = levels.iter().position(|&l| l >= thr) else {
        return 0..0;
    };
    let last = levels.iter().rposition(|&l| l >= thr).unwrap_or(first);
    first * frame..((last + 1) * frame).min(snippet.len())
}

/// Removes silent leading and trailing frames; the interior is untouched.
pub fn trim_silence<S: Sample>(
    snippet: &AudioBuffer<S>,
    threshold_dbfs: f64,
    frame_ms: u32,
) -> AudioBuffer<S> {
    let range = trim_bounds(snippet, threshold_dbfs, frame_ms);
    AudioBuffer {
        samples: snippet.samples[range].to_vec(),
        sample_rate: snippet.sample_rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, amp: f64, ms: u64, rate: u32) -> AudioBuffer<f64> {
        let n = ms_to_samples(ms, rate);
        let samples = (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin())
            .collect();
        AudioBuffer::new(samples, rate).unwrap()
    }

    #[test]
    fn ms_conversion_rounds_half_up() {
        assert_eq!(ms_to_samples(250, 16_000), 4000);
        // 1 ms at 22.05 kHz is 22.05 samples; 10 ms is 220.5 -> 221
        assert_eq!(ms_to_samples(10, 22_050), 221);
        assert_eq!(samples_to_ms(8, 16_000), 1); // 0.5 ms rounds up
        assert_eq!(samples_to_ms(16_000, 16_000), 1000);
    }

    #[test]
    fn slice_counts() {
        let b = AudioBuffer::<f32>::silence(16_000, 16_000).unwrap();
        assert_eq!(b.slice(&TimeInterval::new(0, 1000).unwrap()).unwrap(), b);
        assert_eq!(
            b.slice(&TimeInterval::new(250, 500).unwrap()).unwrap().len(),
            4000
        );
        assert!(matches!(
            b.slice(&TimeInterval::new(900, 1001).unwrap()),
            Err(AudioError::OutOfRange { .. })
        ));
    }

    #[test]
    fn invalid_interval_rejected() {
        assert!(TimeInterval::new(5, 5).is_err());
        assert!(TimeInterval::new(6, 5).is_err());
    }

    #[test]
    fn concat_identity_and_length() {
        let x = tone(440.0, 0.3, 30, 16_000);
        let y = tone(220.0, 0.2, 20, 16_000);
        assert_eq!(concat(std::slice::from_ref(&x)).unwrap(), x);
        assert_eq!(concat(&[x.clone(), y.clone()]).unwrap().len(), x.len() + y.len());
        assert!(matches!(concat::<f64>(&[]), Err(AudioError::NothingToConcat)));
    }

    #[test]
    fn concat_rejects_rate_mismatch() {
        let x = AudioBuffer::<f32>::silence(10, 16_000).unwrap();
        let y = AudioBuffer::<f32>::silence(10, 8_000).unwrap();
        assert!(matches!(
            concat(&[x, y]),
            Err(AudioError::RateMismatch {
                expected: 16_000,
                found: 8_000
            })
        ));
    }

    #[test]
    fn crossfade_overlaps_five_ms() {
        let x = AudioBuffer::new(vec![1.0f64; 160], 16_000).unwrap();
        let y = AudioBuffer::new(vec![0.0f64; 160], 16_000).unwrap();
        let out = concat_with(&[x, y], ConcatOptions { crossfade: true }).unwrap();
        assert_eq!(out.len(), 320 - 80);
        let s = out.samples();
        assert_eq!(s[79], 1.0);
        assert!(s[80] < 1.0 && s[80] > 0.95);
        assert!(s[159] < 0.05);
        assert_eq!(s[160], 0.0);
    }

    #[test]
    fn silence_fill_whole_buffer() {
        let x = tone(440.0, 0.5, 100, 16_000);
        let z = x.silence_fill(&TimeInterval::new(0, 100).unwrap()).unwrap();
        assert_eq!(z.len(), x.len());
        assert!(z.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn rms_analytic_values() {
        let c = AudioBuffer::new(vec![0.5f64; 1600], 16_000).unwrap();
        assert!((c.rms(false).unwrap() - 0.5).abs() < 1e-12);
        assert!((c.rms(true).unwrap() - 0.5).abs() < 1e-12);
        let z = AudioBuffer::<f64>::silence(1600, 16_000).unwrap();
        assert_eq!(z.rms(true).unwrap(), 0.0);
        let sine = tone(1000.0, 0.8, 1000, 16_000);
        assert!((sine.rms(false).unwrap() - 0.8 / 2f64.sqrt()).abs() < 1e-3);
        let empty = AudioBuffer::<f64>::silence(0, 16_000).unwrap();
        assert!(matches!(empty.rms(false), Err(AudioError::EmptyBuffer)));
    }

    #[test]
    fn active_rms_ignores_silent_frames() {
        let mut s = vec![0.0f64; 1600];
        s.extend(vec![0.25f64; 1600]);
        let b = AudioBuffer::new(s, 16_000).unwrap();
        assert!((b.rms(true).unwrap() - 0.25).abs() < 1e-12);
        assert!((b.rms(false).unwrap() - 0.25 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn match_rms_gain() {
        let b = AudioBuffer::new(vec![0.1f64; 800], 16_000).unwrap();
        let m = b.match_rms(0.2).unwrap();
        assert!((m.gain - 2.0).abs() < 1e-12);
        assert_eq!(m.clipped_fraction, 0.0);
        let same = b.match_rms(b.rms(true).unwrap()).unwrap();
        assert_eq!(same.buffer, b);
        let silent = AudioBuffer::<f64>::silence(800, 16_000).unwrap();
        assert!(matches!(silent.match_rms(0.2), Err(AudioError::SilentSnippet)));
    }

    #[test]
    fn match_rms_reports_clipping() {
        let b = AudioBuffer::new(vec![0.5f64; 800], 16_000).unwrap();
        let m = b.match_rms(4.0).unwrap();
        assert_eq!(m.clipped_fraction, 1.0);
        assert!(m.buffer.samples().iter().all(|&s| s == 1.0));
    }

    #[test]
    fn trim_removes_padding() {
        let rate = 16_000;
        let t = tone(300.0, 0.5, 200, rate);
        let pad = |ms| AudioBuffer::<f64>::silence(ms_to_samples(ms, rate), rate).unwrap();
        let padded = concat(&[pad(100), t.clone(), pad(50)]).unwrap();
        let trimmed = padded.trim_silence();
        assert_eq!(trimmed, t);
        assert_eq!(t.trim_silence(), t);
        assert!(pad(30).trim_silence().is_empty());
    }

    #[test]
    fn wav_rejects_stereo() {
        let mut cursor = Cursor::new(Vec::new());
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::new(&mut cursor, spec).unwrap();
        w.write_sample(0i16).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        let err = decode_wav::<f32>(cursor.get_ref()).unwrap_err();
        assert!(matches!(err, AudioError::UnsupportedFormat(_)), "{err}");
    }

    #[test]
    fn wav_one_second() {
        let b = AudioBuffer::<f32>::silence(16_000, 16_000).unwrap();
        let bytes = encode_wav(&b).unwrap();
        let back: AudioBuffer<f32> = decode_wav(&bytes).unwrap();
        assert_eq!(back.len(), 16_000);
        assert_eq!(encode_wav(&back).unwrap(), bytes);
    }

    #[test]
    fn quantize_saturates() {
        assert_eq!(quantize(1.0f32), i16::MAX);
        assert_eq!(quantize(-1.0f32), i16::MIN);
        assert_eq!(quantize(0.5f64), 16384);
    }
}
