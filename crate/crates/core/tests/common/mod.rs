//! Randomized identified corpora with synthetic tone audio.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use deidforge::audio::{ms_to_samples, write_wav, AudioBuffer};
use deidforge::surrogate::Lexicon;
use deidforge::corpus::{
    load_manifest, save_manifest, Category, Conversation, PiiSpan, SpeakerId, SpeakerRole, Token, Turn,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

const NAMES: &str = include_str!("../../data/lexicon/person_name.txt");
const CITIES: &str = include_str!("../../data/lexicon/location.txt");
const ORGS: &str = include_str!("../../data/lexicon/organization.txt");

pub const FILLER: &[&str] = &[
    "the", "and", "you", "have", "that", "for", "with", "this", "not", "but", "what", "about", "your",
    "feel", "pain", "back", "take", "pill", "every", "morning", "evening", "week", "doctor", "okay",
    "yes", "no", "right", "good", "well", "so", "just", "like", "think", "know", "going", "been",
    "since", "last", "time", "little", "bit", "more", "less", "blood", "pressure", "sugar", "sleep",
    "night", "eat", "drink", "water", "coffee", "walk", "knee", "shoulder", "head", "ache", "dose",
    "refill", "labs", "result", "normal", "high", "low", "follow", "up", "visit", "clinic", "appointment",
    "insurance", "form", "sign", "here", "there", "when", "did", "start", "stop", "better", "worse",
    "same", "maybe", "sure", "thanks", "alright", "hmm", "um", "uh", "daughter", "son", "wife",
    "husband", "work", "home", "car", "drive", "store", "weekend", "medicine", "tablet", "twice",
    "daily", "cough", "fever", "cold", "breathing", "chest", "stomach", "diet", "exercise", "weight",
];

/// Words that also occur as surrogates: months, ordinals, weekdays, unit
/// words and small digit strings.
pub const PUBLIC_CALENDAR: &[&str] = &[
    "january", "february", "march", "april", "june", "july", "august", "september", "october",
    "november", "december", "monday", "tuesday", "wednesday", "thursday", "friday", "first", "second",
    "third", "fifth", "tenth", "twelfth", "two", "three", "four", "five", "six", "seven", "eight",
    "nine", "1st", "2nd", "3rd", "4th", "5th", "12th", "20th", "7", "12", "30", "45", "of", "2014",
    "2016", "2017", "2019", "2021", "2022",
];

const MONTHS: &[&str] = &[
    "january", "february", "march", "april", "may", "june", "july", "august", "september", "october",
    "november", "december",
];
const WEEKDAYS: &[&str] = &["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];
const ORDINAL_WORDS: &[&str] = &[
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
    "eleventh", "twelfth",
];
const UNITS: &[&str] = &["one", "two", "three", "four", "five", "six", "seven", "eight", "nine"];

fn lines(text: &str) -> Vec<String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from).collect()
}

/// Lexicon entries split into the part used for original PII values and
/// the part that may also occur as ordinary words.
pub struct Vocab {
    pub private_names: Vec<String>,
    pub public_names: Vec<String>,
    pub private_cities: Vec<String>,
    pub public_cities: Vec<String>,
    pub private_orgs: Vec<String>,
    pub public_orgs: Vec<String>,
}

impl Vocab {
    pub fn new() -> Self {
        let names = lines(NAMES);
        let cities = lines(CITIES);
        let orgs = lines(ORGS);
        Self {
            private_names: names[..40].to_vec(),
            public_names: names[40..52].to_vec(),
            private_cities: cities[..15].to_vec(),
            public_cities: cities[15..].iter().filter(|c| !c.contains(' ')).take(6).cloned().collect(),
            private_orgs: orgs[..12].to_vec(),
            public_orgs: orgs[12..16].to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub conversations: usize,
    pub turns: (usize, usize),
    pub tokens: (usize, usize),
    pub pii_turn_prob: f64,
    pub public_word_prob: f64,
    pub doctors: usize,
    pub rate: u32,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            conversations: 5,
            turns: (4, 8),
            tokens: (3, 10),
            pii_turn_prob: 0.45,
            public_word_prob: 0.3,
            doctors: 2,
            rate: 16_000,
        }
    }
}

pub struct Fixture {
    pub dir: TempDir,
    pub manifest: PathBuf,
    /// As loaded back from `manifest` (absolute audio paths).
    pub corpus: Vec<Conversation>,
}

impl Fixture {
    pub fn path(&self) -> &Path {
        self.dir.path()
    }
}

fn cap(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

fn split(phrase: &str) -> Vec<String> {
    phrase.split(' ').map(String::from).collect()
}

/// Original words of a random PII phrase.
pub fn pii_phrase(rng: &mut ChaCha8Rng, vocab: &Vocab) -> (Category, Vec<String>) {
    match rng.random_range(0..10) {
        0..=2 => {
            let mut w = vec![cap(vocab.private_names.choose(rng).unwrap())];
            if rng.random_bool(0.3) {
                w.push(cap(vocab.private_names.choose(rng).unwrap()));
            }
            (Category::PersonName, w)
        }
        3..=5 => (Category::Date, date_phrase(rng)),
        6 | 7 => (Category::Number, number_phrase(rng)),
        8 => (Category::Location, split(vocab.private_cities.choose(rng).unwrap()).into_iter().map(|w| cap(&w)).collect()),
        _ => (Category::Organization, split(vocab.private_orgs.choose(rng).unwrap())),
    }
}

pub fn date_phrase(rng: &mut ChaCha8Rng) -> Vec<String> {
    let month = rng.random_range(1..=12u32);
    let day = rng.random_range(1..=28u32);
    let year = rng.random_range(2010..=2024);
    let m = MONTHS[month as usize - 1];
    let suffix = match day {
        1 | 21 => "st",
        2 | 22 => "nd",
        3 | 23 => "rd",
        _ => "th",
    };
    match rng.random_range(0..6) {
        0 => vec![cap(m), format!("{day}{suffix},"), year.to_string()],
        1 => vec![format!("{month}/{day}/{year}")],
        2 => vec![format!("{month}/{day}")],
        3 if day <= 12 => vec!["the".into(), ORDINAL_WORDS[day as usize - 1].into(), "of".into(), cap(m)],
        4 => vec![cap(WEEKDAYS[rng.random_range(0..7)])],
        _ => vec![cap(m), format!("{day}{suffix}")],
    }
}

pub fn number_phrase(rng: &mut ChaCha8Rng) -> Vec<String> {
    match rng.random_range(0..3) {
        0 => vec![rng.random_range(100..100_000).to_string()],
        1 => (0..rng.random_range(2..=4)).map(|_| UNITS[rng.random_range(0..9)].to_string()).collect(),
        _ => vec![rng.random_range(10..100).to_string(), rng.random_range(10..100).to_string()],
    }
}

fn public_word(rng: &mut ChaCha8Rng, vocab: &Vocab) -> String {
    match rng.random_range(0..5) {
        0 => vocab.public_names.choose(rng).unwrap().clone(),
        1 => vocab.public_cities.choose(rng).unwrap().clone(),
        2 => split(vocab.public_orgs.choose(rng).unwrap()).choose(rng).unwrap().clone(),
        _ => PUBLIC_CALENDAR.choose(rng).unwrap().to_string(),
    }
}

/// Surrogate lexicon drawing names, places and organizations from the
/// public part of the vocabulary, with the builtin calendar tables.
pub fn lexicon() -> Lexicon {
    let v = Vocab::new();
    Lexicon::with_phrases(BTreeMap::from([
        (Category::PersonName, v.public_names),
        (Category::Location, v.public_cities),
        (Category::Organization, v.public_orgs),
    ]))
}

fn tone(word: &str, ms: u64, rate: u32, amp: f32) -> Vec<f32> {
    let h = Sha256::digest(word.as_bytes());
    let freq = 150.0 + (u16::from_le_bytes([h[0], h[1]]) % 1200) as f32;
    let n = ms_to_samples(ms, rate);
    (0..n)
        .map(|i| amp * (2.0 * std::f32::consts::PI * freq * i as f32 / rate as f32).sin())
        .collect()
}

/// Generates a corpus, writes WAVs and a manifest into a fresh temp dir.
pub fn generate(seed: u64, spec: &FixtureSpec) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_into(seed, spec, dir.path());
    let manifest = dir.path().join("manifest.jsonl");
    save_manifest(&corpus, &manifest).unwrap();
    Fixture {
        corpus: load_manifest(&manifest).unwrap(),
        manifest,
        dir,
    }
}

pub fn generate_into(seed: u64, spec: &FixtureSpec, dir: &Path) -> Vec<Conversation> {
    let vocab = Vocab::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = Vec::new();
    for ci in 0..spec.conversations {
        let doctor = format!("dr{}", rng.random_range(0..spec.doctors.max(1)));
        let patient = format!("pt{seed}_{ci}");
        let mut samples: Vec<f32> = Vec::new();
        let mut t_ms = 0u64;
        let push = |samples: &mut Vec<f32>, t_ms: &mut u64, audio: Vec<f32>, ms: u64| {
            samples.extend(audio);
            *t_ms += ms;
            samples.resize(ms_to_samples(*t_ms, spec.rate), 0.0);
        };
        push(&mut samples, &mut t_ms, vec![], 200);
        let mut turns = Vec::new();
        let n_turns = rng.random_range(spec.turns.0..=spec.turns.1);
        for ti in 0..n_turns {
            let is_doctor = ti % 2 == 0;
            let (role, tag, amp) = if is_doctor {
                (SpeakerRole::Doctor, doctor.clone(), 0.25)
            } else {
                (SpeakerRole::Other, patient.clone(), 0.12)
            };
            let n_tokens = rng.random_range(spec.tokens.0..=spec.tokens.1);
            let mut words: Vec<(String, Option<usize>)> = (0..n_tokens)
                .map(|_| {
                    let w = if rng.random_bool(spec.public_word_prob) {
                        public_word(&mut rng, &vocab)
                    } else {
                        FILLER.choose(&mut rng).unwrap().to_string()
                    };
                    (w, None)
                })
                .collect();
            let mut spans: Vec<(Category, usize)> = Vec::new();
            if rng.random_bool(spec.pii_turn_prob) {
                for _ in 0..rng.random_range(1..=2) {
                    let (category, phrase) = pii_phrase(&mut rng, &vocab);
                    let cuts: Vec<usize> = (0..=words.len())
                        .filter(|&i| i == 0 || i == words.len() || words[i - 1].1.is_none() || words[i - 1].1 != words[i].1)
                        .collect();
                    let at = *cuts.choose(&mut rng).unwrap();
                    let k = spans.len();
                    let inserted: Vec<_> = phrase.into_iter().map(|w| (w, Some(k))).collect();
                    words.splice(at..at, inserted);
                    spans.push((category, k));
                }
            }
            let mut tokens = Vec::new();
            for (w, span) in &words {
                let ms = rng.random_range(150..=400);
                let start = t_ms;
                push(&mut samples, &mut t_ms, tone(&w.to_lowercase(), ms, spec.rate, amp), ms);
                let mut tok = Token::new(w.clone(), start, t_ms);
                if let Some(k) = span {
                    tok = tok.with_pii(format!("t{ti}s{k}"));
                }
                tokens.push(tok);
                let gap = rng.random_range(0..=60);
                push(&mut samples, &mut t_ms, vec![], gap);
            }
            let mut turn = Turn::new(SpeakerId { role, tag }, tokens);
            for (category, k) in spans {
                let id = format!("t{ti}s{k}");
                let idx: Vec<usize> =
                    turn.tokens.iter().enumerate().filter(|(_, t)| t.pii.as_deref() == Some(&id)).map(|(i, _)| i).collect();
                turn.pii_spans.push(PiiSpan {
                    id,
                    category,
                    first_token: idx[0],
                    last_token: *idx.last().unwrap(),
                });
            }
            turn.pii_spans.sort_by_key(|s| s.first_token);
            turns.push(turn);
            let pause = rng.random_range(150..=400);
            push(&mut samples, &mut t_ms, vec![], pause);
        }
        let id = format!("c{ci:02}");
        let file = format!("{id}.wav");
        write_wav(&AudioBuffer::new(samples, spec.rate).unwrap(), dir.join(&file)).unwrap();
        corpus.push(Conversation {
            id,
            audio: PathBuf::from(file),
            sample_rate: spec.rate,
            turns,
        });
    }
    corpus
}

/// SHA-256 of every file under `dir`, keyed by relative path.
pub fn tree_digests(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, hex::encode(Sha256::digest(fs::read(&path).unwrap())));
            }
        }
    }
    out
}
