//! Category-preserving surrogate generation.
//!
//! Every replacement is a pure function of the [`SurrogateKey`], the run
//! seed and the lexicon. Phrase categories (names, places, organizations and
//! any extra label with a lexicon file) draw an entry with
//! `index = hash(key, seed) mod len`, moving to the next entry when the draw
//! equals the original phrase. Dates keep their surface form and are shifted
//! on the calendar; numbers keep their digit layout.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Days, NaiveDate};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::TimeInterval;
use crate::corpus::{normalize_token, Category, Turn};
use crate::seed;

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("lexicon for {0} is empty")]
    EmptyLexicon(Category),
    #[error("no lexicon for category {0}")]
    UnknownCategory(Category),
    #[error("no admissible surrogate for {category} phrase {phrase:?} after {attempts} attempts")]
    Exhausted {
        category: Category,
        phrase: String,
        attempts: u32,
    },
    #[error("lexicon {path}: {message}")]
    Lexicon { path: PathBuf, message: String },
}

pub type Result<T, E = SurrogateError> = std::result::Result<T, E>;

// ---------------------------------------------------------------------------
// Lexicon

/// Rendering style of a date phrase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceForm {
    /// `6/3 2021`, `6/3/2021`, `6/3`
    NumericSlash,
    /// `april 7, 2020`, `april 7th`
    SpokenMonthDayYear,
    /// `first of may, 2021`, `the twenty-first of june`
    SpokenOrdinal,
    MonthOnly,
    DayOfWeekOnly,
    Unparsed,
}

impl SurfaceForm {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "numeric_slash" => Self::NumericSlash,
            "spoken_month_day_year" => Self::SpokenMonthDayYear,
            "spoken_ordinal" => Self::SpokenOrdinal,
            "month_only" => Self::MonthOnly,
            "day_of_week_only" => Self::DayOfWeekOnly,
            _ => return None,
        })
    }
}

const BUILTIN: &[(&str, &str)] = &[
    ("person_name", include_str!("../data/lexicon/person_name.txt")),
    ("location", include_str!("../data/lexicon/location.txt")),
    ("organization", include_str!("../data/lexicon/organization.txt")),
    ("month", include_str!("../data/lexicon/month.txt")),
    ("weekday", include_str!("../data/lexicon/weekday.txt")),
    ("date_forms", include_str!("../data/lexicon/date_forms.txt")),
];

/// Candidate phrases per category plus the calendar word tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    phrases: BTreeMap<Category, Vec<String>>,
    months: Vec<String>,
    weekdays: Vec<String>,
    date_forms: Vec<(SurfaceForm, u32)>,
}

fn parse_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_whitespace()
                .map(normalize_token)
                .filter(|w| !w.is_empty())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .filter(|l| !l.is_empty())
        .collect()
}

impl Lexicon {
    /// The lexicon shipped with the crate.
    pub fn builtin() -> Self {
        let files: BTreeMap<String, String> = BUILTIN
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Self::from_files(&files, Path::new("<builtin>")).expect("builtin lexicon is valid")
    }

    /// Loads every `*.txt` file in `dir`: `person_name`, `location`,
    /// `organization`, `month`, `weekday`, `date_forms`, and any other file
    /// stem as an extra category label. Missing calendar tables fall back
    /// to the builtin ones.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let err = |message: String| SurrogateError::Lexicon {
            path: dir.to_path_buf(),
            message,
        };
        let mut files: BTreeMap<String, String> = BTreeMap::new();
        let entries = fs::read_dir(dir).map_err(|e| err(e.to_string()))?;
        for entry in entries {
            let path = entry.map_err(|e| err(e.to_string()))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let text = fs::read_to_string(&path).map_err(|e| err(e.to_string()))?;
            files.insert(stem.to_string(), text);
        }
        for (name, text) in BUILTIN {
            if matches!(*name, "month" | "weekday" | "date_forms") {
                files
                    .entry(name.to_string())
                    .or_insert_with(|| text.to_string());
            }
        }
        Self::from_files(&files, dir)
    }

    fn from_files(files: &BTreeMap<String, String>, origin: &Path) -> Result<Self> {
        let err = |message: String| SurrogateError::Lexicon {
            path: origin.to_path_buf(),
            message,
        };
        let mut phrases = BTreeMap::new();
        let mut months = Vec::new();
        let mut weekdays = Vec::new();
        let mut date_forms = Vec::new();
        for (name, text) in files {
            match name.as_str() {
                "month" => months = parse_lines(text),
                "weekday" => weekdays = parse_lines(text),
                "date_forms" => {
                    for line in parse_lines(text) {
                        let mut parts = line.split_whitespace();
                        let form = parts.next().and_then(SurfaceForm::parse);
                        let weight = parts.next().and_then(|w| w.parse::<u32>().ok());
                        match (form, weight) {
                            (Some(f), Some(w)) if f != SurfaceForm::Unparsed => {
                                date_forms.push((f, w))
                            }
                            _ => return Err(err(format!("bad date_forms line {line:?}"))),
                        }
                    }
                }
                other => {
                    let category = Category::parse(other)
                        .map_err(|_| err(format!("file stem {other:?} is not a category")))?;
                    if matches!(category, Category::Date | Category::Number) {
                        continue;
                    }
                    let list = parse_lines(text);
                    let mut seen = HashSet::new();
                    if let Some(dup) = list.iter().find(|p| !seen.insert(p.as_str())) {
                        return Err(err(format!("duplicate {other} entry {dup:?}")));
                    }
                    phrases.insert(category, list);
                }
            }
        }
        if months.len() != 12 {
            return Err(err(format!("month table has {} entries", months.len())));
        }
        if weekdays.len() != 7 {
            return Err(err(format!("weekday table has {} entries", weekdays.len())));
        }
        if date_forms.iter().map(|(_, w)| w).sum::<u32>() == 0 {
            return Err(err("date_forms weights are all zero".into()));
        }
        Ok(Self {
            phrases,
            months,
            weekdays,
            date_forms,
        })
    }

    /// Builds a lexicon with explicit phrase lists and the builtin calendar tables.
    pub fn with_phrases(phrases: BTreeMap<Category, Vec<String>>) -> Self {
        Self {
            phrases,
            ..Self::builtin()
        }
    }

    pub fn candidates(&self, category: &Category) -> Option<&[String]> {
        self.phrases.get(category).map(Vec::as_slice)
    }

    pub fn months(&self) -> &[String] {
        &self.months
    }

    pub fn weekdays(&self) -> &[String] {
        &self.weekdays
    }

    /// Hex SHA-256 over every table, in a fixed order.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        let mut table = |name: &str, rows: &mut dyn Iterator<Item = String>| {
            h.update(name.as_bytes());
            h.update([0x1e]);
            for row in rows {
                h.update(row.as_bytes());
                h.update([0x1f]);
            }
        };
        for (category, phrases) in &self.phrases {
            table(category.as_str(), &mut phrases.iter().cloned());
        }
        table("<month>", &mut self.months.iter().cloned());
        table("<weekday>", &mut self.weekdays.iter().cloned());
        table("<date_forms>", &mut self.date_forms.iter().map(|(f, w)| format!("{f:?}={w}")));
        hex::encode(h.finalize())
    }

    fn month_index(&self, word: &str) -> Option<u32> {
        self.months.iter().position(|m| m == word).map(|i| i as u32 + 1)
    }

    fn weekday_index(&self, word: &str) -> Option<u32> {
        self.weekdays.iter().position(|m| m == word).map(|i| i as u32)
    }
}

// ---------------------------------------------------------------------------
// Keys and configuration

/// Identity of a surrogate decision. Equal keys get equal surrogates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SurrogateKey {
    pub conversation_id: String,
    /// Normalized original phrase, or the tombstone id when the original
    /// text is not available.
    pub normalized_phrase: String,
    pub category: Category,
}

impl SurrogateKey {
    pub fn new(conversation_id: &str, normalized_phrase: &str, category: Category) -> Self {
        Self {
            conversation_id: conversation_id.to_string(),
            normalized_phrase: normalized_phrase.to_string(),
            category,
        }
    }

    fn parts<'a>(&'a self, purpose: &'a [u8], attempt: &'a [u8; 4]) -> [&'a [u8]; 5] {
        [
            purpose,
            self.conversation_id.as_bytes(),
            self.normalized_phrase.as_bytes(),
            self.category.as_str().as_bytes(),
            attempt.as_slice(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    pub seed: u64,
    /// Years are shifted by a uniform draw from `-range..=range`.
    pub date_year_range: u32,
    /// Days are shifted by a uniform magnitude in `[lo, hi]` with random sign.
    pub date_day_range: (u32, u32),
    /// Redraws allowed when a candidate is excluded.
    pub max_attempts: u32,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            date_year_range: 2,
            date_day_range: (30, 400),
            max_attempts: 64,
        }
    }
}

/// Hash driving the lexicon draw for `key` on a given attempt.
pub fn selection_hash(key: &SurrogateKey, seed: u64, attempt: u32) -> u64 {
    seed::derive(seed, &key.parts(b"select", &attempt.to_le_bytes()))
}

/// The selection rule: `hash mod n`, skipping to the next entry when the
/// draw equals `original`.
pub fn select_index(candidates: &[String], original: &str, hash: u64) -> usize {
    let n = candidates.len();
    let i = (hash % n as u64) as usize;
    if n > 1 && candidates[i] == original {
        (i + 1) % n
    } else {
        i
    }
}

// ---------------------------------------------------------------------------
// Exclusions

/// Phrases a surrogate must never contain as a contiguous word sequence.
#[derive(Debug, Clone, Default)]
pub struct Exclusions {
    by_first: HashMap<String, Vec<Vec<String>>>,
}

impl Exclusions {
    pub fn new<I, P>(phrases: I) -> Self
    where
        I: IntoIterator<Item = P>,
        P: AsRef<[String]>,
    {
        let mut by_first: HashMap<String, Vec<Vec<String>>> = HashMap::new();
        for p in phrases {
            let p = p.as_ref();
            if let Some(first) = p.first() {
                by_first.entry(first.clone()).or_default().push(p.to_vec());
            }
        }
        Self { by_first }
    }

    pub fn is_empty(&self) -> bool {
        self.by_first.is_empty()
    }

    /// Whether `words` contains any excluded phrase.
    pub fn blocks(&self, words: &[String]) -> bool {
        words.iter().enumerate().any(|(i, w)| {
            self.by_first.get(w).is_some_and(|cands| {
                cands
                    .iter()
                    .any(|p| words[i..].len() >= p.len() && words[i..i + p.len()] == p[..])
            })
        })
    }
}

// ---------------------------------------------------------------------------
// Dates

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
struct DateStyle {
    year_with_slash: bool,
    day_suffix: bool,
    leading_the: bool,
    ordinal_hyphen: bool,
}

/// A date phrase split into surface form and calendar components.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DateExpression {
    pub surface_form: SurfaceForm,
    pub day: Option<u32>,
    pub month: Option<u32>,
    pub year: Option<i32>,
    /// 0 = first entry of the weekday table.
    pub weekday: Option<u32>,
    style: DateStyle,
}

impl DateExpression {
    fn unparsed() -> Self {
        Self {
            surface_form: SurfaceForm::Unparsed,
            day: None,
            month: None,
            year: None,
            weekday: None,
            style: DateStyle::default(),
        }
    }
}

const UNITS: [&str; 10] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
];
const TEENS: [&str; 10] = [
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
];
const TENS: [&str; 8] = [
    "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
];
const ORDINALS: [&str; 20] = [
    "first",
    "second",
    "third",
    "fourth",
    "fifth",
    "sixth",
    "seventh",
    "eighth",
    "ninth",
    "tenth",
    "eleventh",
    "twelfth",
    "thirteenth",
    "fourteenth",
    "fifteenth",
    "sixteenth",
    "seventeenth",
    "eighteenth",
    "nineteenth",
    "twentieth",
];

/// Spoken ordinal for days 1..=31, as words.
fn ordinal_words(day: u32) -> Vec<&'static str> {
    match day {
        1..=20 => vec![ORDINALS[day as usize - 1]],
        30 => vec!["thirtieth"],
        21..=29 => vec!["twenty", ORDINALS[day as usize - 21]],
        31 => vec!["thirty", "first"],
        _ => unreachable!("day out of range"),
    }
}

fn parse_ordinal(words: &[&str]) -> Option<u32> {
    match words {
        [w] => match *w {
            "thirtieth" => Some(30),
            _ => ORDINALS.iter().position(|o| o == w).map(|i| i as u32 + 1),
        },
        [tens, unit] => {
            let base = match *tens {
                "twenty" => 20,
                "thirty" => 30,
                _ => return None,
            };
            let u = ORDINALS[..9].iter().position(|o| o == unit)? as u32 + 1;
            Some(base + u).filter(|d| *d <= 31)
        }
        _ => None,
    }
}

/// Days in a month; a missing year is treated as a leap year.
fn days_in_month(month: u32, year: Option<i32>) -> u32 {
    let y = year.unwrap_or(2000);
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(y + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(y, month + 1, 1)
    };
    next.and_then(|n| n.pred_opt()).map_or(0, |d| d.day())
}

fn valid_date(day: u32, month: u32, year: Option<i32>) -> bool {
    (1..=12).contains(&month) && day >= 1 && day <= days_in_month(month, year)
}

fn parse_year(w: &str) -> Option<i32> {
    (w.len() == 4 && w.bytes().all(|b| b.is_ascii_digit()))
        .then(|| w.parse().ok())
        .flatten()
        .filter(|y| *y >= 1000)
}

fn parse_day_number(w: &str) -> Option<(u32, bool)> {
    let digits: String = w.chars().take_while(char::is_ascii_digit).collect();
    let suffix = &w[digits.len()..];
    if digits.is_empty() || digits.len() > 2 || !matches!(suffix, "" | "st" | "nd" | "rd" | "th") {
        return None;
    }
    Some((digits.parse().ok()?, !suffix.is_empty()))
}

/// Parses a date phrase. Anything not matching a known layout, or not a
/// real calendar date, is [`SurfaceForm::Unparsed`].
pub fn parse_date(words: &[String], lexicon: &Lexicon) -> DateExpression {
    let norm: Vec<String> = words
        .iter()
        .map(|w| normalize_token(w))
        .filter(|w| !w.is_empty())
        .collect();
    let w: Vec<&str> = norm.iter().map(String::as_str).collect();
    let mut expr = DateExpression::unparsed();
    let full = |form, day, month, year: Option<i32>, style| {
        valid_date(day, month, year).then_some(DateExpression {
            surface_form: form,
            day: Some(day),
            month: Some(month),
            year,
            weekday: None,
            style,
        })
    };
    let parsed = match w.as_slice() {
        [single] if lexicon.month_index(single).is_some() => {
            expr.surface_form = SurfaceForm::MonthOnly;
            expr.month = lexicon.month_index(single);
            Some(expr)
        }
        [single] if lexicon.weekday_index(single).is_some() => {
            expr.surface_form = SurfaceForm::DayOfWeekOnly;
            expr.weekday = lexicon.weekday_index(single);
            Some(expr)
        }
        [md] | [md, _] if md.contains('/') => {
            let parts: Vec<&str> = md.split('/').collect();
            let layout = match (parts.as_slice(), w.get(1)) {
                ([m, d], None) => Some((*m, *d, None, false)),
                ([m, d], Some(y)) => parse_year(y).map(|y| (*m, *d, Some(y), false)),
                ([m, d, y], None) => parse_year(y).map(|y| (*m, *d, Some(y), true)),
                _ => None,
            };
            layout.and_then(|(m, d, year, slash)| {
                let (m, d) = (m.parse().ok()?, d.parse().ok()?);
                full(
                    SurfaceForm::NumericSlash,
                    d,
                    m,
                    year,
                    DateStyle {
                        year_with_slash: slash,
                        ..Default::default()
                    },
                )
            })
        }
        [month, day, rest @ ..] if lexicon.month_index(month).is_some() && rest.len() <= 1 => {
            let year = match rest {
                [y] => parse_year(y).map(Some),
                _ => Some(None),
            };
            match (parse_day_number(day), year) {
                (Some((d, suffix)), Some(year)) => full(
                    SurfaceForm::SpokenMonthDayYear,
                    d,
                    lexicon.month_index(month).expect("checked"),
                    year,
                    DateStyle {
                        day_suffix: suffix,
                        ..Default::default()
                    },
                ),
                _ => None,
            }
        }
        _ => {
            let (leading_the, rest) = match w.split_first() {
                Some((&"the", rest)) => (true, rest),
                _ => (false, w.as_slice()),
            };
            rest.iter().position(|x| *x == "of").and_then(|of| {
                let (day, ordinal_hyphen) = match &rest[..of] {
                    [single] if single.contains('-') => {
                        let parts: Vec<&str> = single.split('-').collect();
                        (parse_ordinal(&parts)?, true)
                    }
                    words => (parse_ordinal(words)?, false),
                };
                let (month, year) = match &rest[of + 1..] {
                    [m] => (lexicon.month_index(m)?, None),
                    [m, y] => (lexicon.month_index(m)?, Some(parse_year(y)?)),
                    _ => return None,
                };
                full(
                    SurfaceForm::SpokenOrdinal,
                    day,
                    month,
                    year,
                    DateStyle {
                        leading_the,
                        ordinal_hyphen,
                        ..Default::default()
                    },
                )
            })
        }
    };
    parsed.unwrap_or_else(DateExpression::unparsed)
}

/// Renders a date expression back to words.
pub fn render_date(expr: &DateExpression, lexicon: &Lexicon) -> Vec<String> {
    let month_name = |m: u32| lexicon.months[m as usize - 1].clone();
    let with_comma = |s: String, year: Option<i32>| {
        if year.is_some() {
            format!("{s},")
        } else {
            s
        }
    };
    let mut out = Vec::new();
    match expr.surface_form {
        SurfaceForm::MonthOnly => out.push(month_name(expr.month.unwrap_or(1))),
        SurfaceForm::DayOfWeekOnly => {
            out.push(lexicon.weekdays[expr.weekday.unwrap_or(0) as usize].clone())
        }
        SurfaceForm::NumericSlash => {
            let md = format!("{}/{}", expr.month.unwrap_or(1), expr.day.unwrap_or(1));
            match expr.year {
                Some(y) if expr.style.year_with_slash => out.push(format!("{md}/{y}")),
                Some(y) => {
                    out.push(md);
                    out.push(y.to_string());
                }
                None => out.push(md),
            }
        }
        SurfaceForm::SpokenMonthDayYear => {
            let day = expr.day.unwrap_or(1);
            out.push(month_name(expr.month.unwrap_or(1)));
            let d = if expr.style.day_suffix {
                let suffix = match (day % 10, day % 100) {
                    (_, 11..=13) => "th",
                    (1, _) => "st",
                    (2, _) => "nd",
                    (3, _) => "rd",
                    _ => "th",
                };
                format!("{day}{suffix}")
            } else {
                day.to_string()
            };
            out.push(with_comma(d, expr.year));
            out.extend(expr.year.map(|y| y.to_string()));
        }
        SurfaceForm::SpokenOrdinal => {
            if expr.style.leading_the {
                out.push("the".into());
            }
            let ordinal = ordinal_words(expr.day.unwrap_or(1));
            if expr.style.ordinal_hyphen {
                out.push(ordinal.join("-"));
            } else {
                out.extend(ordinal.into_iter().map(String::from));
            }
            out.push("of".into());
            out.push(with_comma(month_name(expr.month.unwrap_or(1)), expr.year));
            out.extend(expr.year.map(|y| y.to_string()));
        }
        SurfaceForm::Unparsed => {}
    }
    out
}

fn shift_full_date<R: Rng>(expr: &DateExpression, config: &SurrogateConfig, rng: &mut R) -> DateExpression {
    let (day, month) = (expr.day.unwrap_or(1), expr.month.unwrap_or(1));
    let base = NaiveDate::from_ymd_opt(expr.year.unwrap_or(2000), month, day)
        .expect("parsed dates are valid");
    let (lo, hi) = config.date_day_range;
    let magnitude = rng.random_range(lo.min(hi)..=hi.max(lo)) as u64;
    let shifted = if rng.random_bool(0.5) {
        base.checked_add_days(Days::new(magnitude))
    } else {
        base.checked_sub_days(Days::new(magnitude))
    }
    .unwrap_or(base);
    let range = config.date_year_range as i32;
    let year_offset = rng.random_range(-range..=range);
    let target_year = (shifted.year() + year_offset).clamp(1000, 9999);
    let moved = shifted
        .with_year(target_year)
        .or_else(|| NaiveDate::from_ymd_opt(target_year, shifted.month(), 28))
        .expect("day 28 exists in every month");
    DateExpression {
        day: Some(moved.day()),
        month: Some(moved.month()),
        year: expr.year.map(|_| moved.year()),
        ..expr.clone()
    }
}

fn date_candidate(
    expr: &DateExpression,
    key: &SurrogateKey,
    config: &SurrogateConfig,
    lexicon: &Lexicon,
    attempt: u32,
) -> Vec<String> {
    let mut rng = seed::rng(config.seed, &key.parts(b"date", &attempt.to_le_bytes()));
    let out = match expr.surface_form {
        SurfaceForm::MonthOnly => DateExpression {
            month: expr.month.map(|m| (m - 1 + rng.random_range(1..12)) % 12 + 1),
            ..expr.clone()
        },
        SurfaceForm::DayOfWeekOnly => DateExpression {
            weekday: expr.weekday.map(|d| (d + rng.random_range(1..7)) % 7),
            ..expr.clone()
        },
        SurfaceForm::NumericSlash | SurfaceForm::SpokenMonthDayYear | SurfaceForm::SpokenOrdinal => {
            shift_full_date(expr, config, &mut rng)
        }
        SurfaceForm::Unparsed => {
            let total: u32 = lexicon.date_forms.iter().map(|(_, w)| w).sum();
            let mut pick = rng.random_range(0..total);
            let form = lexicon
                .date_forms
                .iter()
                .find(|(_, w)| {
                    let hit = pick < *w;
                    pick = pick.saturating_sub(*w);
                    hit
                })
                .map(|(f, _)| *f)
                .expect("weights cover the draw");
            let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid");
            let date = start + Days::new(rng.random_range(0..365 * 26));
            DateExpression {
                surface_form: form,
                day: Some(date.day()),
                month: Some(date.month()),
                year: Some(date.year()),
                weekday: Some(date.weekday().num_days_from_monday()),
                style: DateStyle::default(),
            }
        }
    };
    render_date(&out, lexicon)
}

// ---------------------------------------------------------------------------
// Numbers

fn word_class(w: &str) -> Option<&'static [&'static str]> {
    [UNITS.as_slice(), TEENS.as_slice(), TENS.as_slice()]
        .into_iter()
        .find(|class| class.contains(&w))
}

fn number_candidate<R: Rng>(words: &[String], token_count: usize, rng: &mut R) -> Vec<String> {
    if words.is_empty() {
        return (0..token_count.max(1))
            .map(|_| UNITS[rng.random_range(0..UNITS.len())].to_string())
            .collect();
    }
    words
        .iter()
        .map(|w| {
            if w.bytes().any(|b| b.is_ascii_digit()) {
                let chars: Vec<char> = w.chars().collect();
                let mut out = String::with_capacity(w.len());
                for (i, c) in chars.iter().enumerate() {
                    if c.is_ascii_digit() {
                        let run_start = i == 0 || !chars[i - 1].is_ascii_digit();
                        let run_long = chars.get(i + 1).is_some_and(char::is_ascii_digit);
                        let lo = if run_start && run_long { 1 } else { 0 };
                        out.push(char::from(b'0' + rng.random_range(lo..10u8)));
                    } else {
                        out.push(*c);
                    }
                }
                out
            } else {
                w.split('-')
                    .map(|part| match word_class(part) {
                        Some(class) => {
                            let others: Vec<&&str> = class.iter().filter(|c| **c != part).collect();
                            others[rng.random_range(0..others.len())].to_string()
                        }
                        None => part.to_string(),
                    })
                    .collect::<Vec<_>>()
                    .join("-")
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Generator

/// Produces surrogates for one run: a lexicon, a configuration and the set
/// of phrases no surrogate may contain.
#[derive(Debug, Clone)]
pub struct SurrogateGenerator<'a> {
    lexicon: &'a Lexicon,
    config: SurrogateConfig,
    exclusions: Exclusions,
}

impl<'a> SurrogateGenerator<'a> {
    pub fn new(lexicon: &'a Lexicon, config: SurrogateConfig) -> Self {
        Self {
            lexicon,
            config,
            exclusions: Exclusions::default(),
        }
    }

    pub fn with_exclusions(mut self, exclusions: Exclusions) -> Self {
        self.exclusions = exclusions;
        self
    }

    pub fn config(&self) -> &SurrogateConfig {
        &self.config
    }

    pub fn lexicon(&self) -> &Lexicon {
        self.lexicon
    }

    /// Surrogate words for a phrase. `original` holds the original words
    /// when known (empty otherwise); `token_count` is the span length.
    pub fn generate(
        &self,
        original: &[String],
        token_count: usize,
        key: &SurrogateKey,
    ) -> Result<Vec<String>> {
        let original: Vec<String> = original
            .iter()
            .map(|w| normalize_token(w))
            .filter(|w| !w.is_empty())
            .collect();
        let date = (key.category == Category::Date).then(|| parse_date(&original, self.lexicon));
        for attempt in 0..self.config.max_attempts.max(1) {
            let candidate = self.candidate(&original, token_count, key, date.as_ref(), attempt)?;
            let normalized: Vec<String> = candidate
                .iter()
                .map(|w| normalize_token(w))
                .filter(|w| !w.is_empty())
                .collect();
            let structural = matches!(key.category, Category::Date | Category::Number);
            if structural && !original.is_empty() && normalized == original {
                continue;
            }
            if self.exclusions.blocks(&normalized) {
                continue;
            }
            return Ok(candidate);
        }
        Err(SurrogateError::Exhausted {
            category: key.category.clone(),
            phrase: key.normalized_phrase.clone(),
            attempts: self.config.max_attempts,
        })
    }

    fn candidate(
        &self,
        original: &[String],
        token_count: usize,
        key: &SurrogateKey,
        date: Option<&DateExpression>,
        attempt: u32,
    ) -> Result<Vec<String>> {
        match &key.category {
            Category::Date => Ok(date_candidate(
                date.expect("parsed for dates"),
                key,
                &self.config,
                self.lexicon,
                attempt,
            )),
            Category::Number => {
                let mut rng = seed::rng(self.config.seed, &key.parts(b"number", &attempt.to_le_bytes()));
                Ok(number_candidate(original, token_count, &mut rng))
            }
            category => {
                let list = self
                    .lexicon
                    .candidates(category)
                    .ok_or_else(|| SurrogateError::UnknownCategory(category.clone()))?;
                if list.is_empty() {
                    return Err(SurrogateError::EmptyLexicon(category.clone()));
                }
                let hash = selection_hash(key, self.config.seed, attempt);
                let i = select_index(list, &original.join(" "), hash);
                Ok(list[i].split(' ').map(String::from).collect())
            }
        }
    }
}

/// Surrogate for a phrase with the default date ranges and no exclusions.
pub fn make_surrogate(
    phrase: &[String],
    category: Category,
    key: &SurrogateKey,
    seed: u64,
    lexicon: &Lexicon,
) -> Result<Vec<String>> {
    debug_assert_eq!(key.category, category);
    let config = SurrogateConfig {
        seed,
        ..Default::default()
    };
    SurrogateGenerator::new(lexicon, config).generate(phrase, phrase.len(), key)
}

/// Shifted, re-rendered date in the same surface form.
pub fn surrogate_date(
    expr: &DateExpression,
    key: &SurrogateKey,
    config: &SurrogateConfig,
    lexicon: &Lexicon,
) -> Vec<String> {
    let original = render_date(expr, lexicon);
    let original_norm: Vec<String> = original.iter().map(|w| normalize_token(w)).collect();
    (0..config.max_attempts.max(1))
        .map(|a| date_candidate(expr, key, config, lexicon, a))
        .find(|c| {
            expr.surface_form == SurfaceForm::Unparsed
                || c.iter().map(|w| normalize_token(w)).collect::<Vec<_>>() != original_norm
        })
        .unwrap_or_else(|| date_candidate(expr, key, config, lexicon, 0))
}

/// Number surrogate keeping per-token digit counts and word classes.
pub fn surrogate_number(words: &[String], key: &SurrogateKey, seed: u64) -> Vec<String> {
    let mut rng = seed::rng(seed, &key.parts(b"number", &0u32.to_le_bytes()));
    number_candidate(words, words.len(), &mut rng)
}

// ---------------------------------------------------------------------------
// Plans

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub tombstone_id: String,
    pub category: Category,
    pub interval: TimeInterval,
    pub surrogate: Vec<String>,
}

/// Surrogates for every tombstone of a turn, in temporal order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplacementPlan {
    pub entries: Vec<PlanEntry>,
}

impl ReplacementPlan {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn surrogate_token_count(&self) -> usize {
        self.entries.iter().map(|e| e.surrogate.len()).sum()
    }
}

/// Plans replacements for a redacted turn. `originals` maps tombstone ids to
/// the original words when an identified source is available.
pub fn plan_turn(
    turn: &Turn,
    conversation_id: &str,
    originals: Option<&HashMap<String, Vec<String>>>,
    generator: &SurrogateGenerator<'_>,
) -> Result<ReplacementPlan> {
    let mut tombstones: Vec<_> = turn.tombstones.iter().collect();
    tombstones.sort_by_key(|t| t.interval);
    let mut entries = Vec::with_capacity(tombstones.len());
    for t in tombstones {
        let original = originals.and_then(|o| o.get(&t.id));
        let phrase = match original {
            Some(words) => words.iter().map(|w| normalize_token(w)).collect::<Vec<_>>().join(" "),
            None => t.id.clone(),
        };
        let key = SurrogateKey::new(conversation_id, &phrase, t.category.clone());
        let surrogate = generator.generate(original.map_or(&[][..], Vec::as_slice), t.token_count, &key)?;
        entries.push(PlanEntry {
            tombstone_id: t.id.clone(),
            category: t.category.clone(),
            interval: t.interval,
            surrogate,
        });
    }
    Ok(ReplacementPlan { entries })
}
