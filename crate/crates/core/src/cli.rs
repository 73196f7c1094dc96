//! The `deidforge` command line.
//!
//! Exit codes: 0 success, 1 validation or scoring failure, 2 configuration
//! error, 3 privacy violation.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    corpus_stats, frequency_ratios, load_manifest, standard_bands, validate_manifest, Conversation, CorpusError,
};
use crate::eval::{load_hypotheses, render_table, score, EvalLexicons};
use crate::pipeline::{audit_phrases, build, verify_privacy, BuildOptions, Strategy};
use crate::splice::{build_index, MissPolicy};
use crate::surrogate::{Lexicon, SurrogateConfig};
use crate::tts::{HttpSynthesizer, StubSynthesizer, Synthesizer, TtsConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PRIVACY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "deidforge", version, about = "De-identify speech corpora and score recognizers")]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true, env = "DEIDFORGE_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a manifest and its audio; prints one JSON diagnostic per problem.
    Validate {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Corpus statistics; with --after, frequency ratios and r10/r20 bands.
    Stats {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Corpus after de-identification.
        #[arg(long)]
        after: Option<PathBuf>,
        /// Write the bands as JSON to this file.
        #[arg(long)]
        bands: Option<PathBuf>,
    },
    /// Build de-identified corpora.
    Build(BuildArgs),
    /// Write the splice occurrence index of a corpus.
    Index {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Index file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a hypothesis file against a reference manifest.
    Score {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Hypotheses, JSON Lines {conversation, turn, words:[{text, role}]}.
        #[arg(long)]
        hyp: PathBuf,
        /// Directory of *.txt category word lists.
        #[arg(long)]
        lexicons: Option<PathBuf>,
        /// Band token sets as written by `stats --bands`.
        #[arg(long)]
        bands: Option<PathBuf>,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Strategy name (baseline-id, ..., spliced-sp), model id (B1, ..., S2) or `all`.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Surrogate lexicon directory.
    #[arg(long)]
    lexicons: Option<PathBuf>,
    #[arg(long, conflicts_with = "tts_stub")]
    tts_endpoint: Option<String>,
    /// Use the offline tone synthesizer.
    #[arg(long)]
    tts_stub: bool,
    /// skip-turn or drop-parts.
    #[arg(long)]
    miss_policy: Option<String>,
    /// Identified manifest to audit the outputs against.
    #[arg(long)]
    audit: Option<PathBuf>,
}

/// The config file. Relative paths are resolved against its directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: CorpusSection,
    pub surrogate: SurrogateConfig,
    pub splice: SpliceSection,
    pub tts: TtsSection,
    pub pipeline: PipelineSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub manifest: Option<PathBuf>,
    pub lexicons: Option<PathBuf>,
    pub eval_lexicons: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpliceSection {
    pub miss_policy: MissPolicy,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TtsSection {
    pub stub: bool,
    #[serde(flatten)]
    pub engine: TtsConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub out: Option<PathBuf>,
    pub strategy: Option<String>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

struct Failure(i32, String);

type Outcome = Result<(), Failure>;

fn config_error(message: impl Into<String>) -> Failure {
    Failure(EXIT_CONFIG, message.into())
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let mut cfg: RunConfig =
        serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [
        &mut cfg.corpus.manifest,
        &mut cfg.corpus.lexicons,
        &mut cfg.corpus.eval_lexicons,
        &mut cfg.pipeline.out,
    ]
    .into_iter()
    .flatten()
    {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

fn pick(flag: Option<PathBuf>, file: &Option<PathBuf>, what: &str) -> Result<PathBuf, Failure> {
    flag.or_else(|| file.clone())
        .ok_or_else(|| config_error(format!("missing {what}")))
}

fn load_corpus(path: &Path) -> Result<Vec<Conversation>, Failure> {
    load_manifest(path).map_err(|e| match e {
        CorpusError::Io { .. } => config_error(e.to_string()),
        other => Failure(EXIT_FAILURE, other.to_string()),
    })
}

fn json_line(out: &mut dyn Write, value: &impl Serialize) -> Outcome {
    writeln!(out, "{}", serde_json::to_string(value).expect("serializable"))
        .map_err(|e| Failure(EXIT_FAILURE, e.to_string()))
}

fn cmd_validate(manifest: &Path, out: &mut dyn Write) -> Outcome {
    let errors = validate_manifest(manifest);
    for e in &errors {
        json_line(out, &e.diagnostic())?;
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Failure(EXIT_FAILURE, format!("{} problem(s) found", errors.len())))
    }
}

#[derive(Serialize)]
struct StatsOutput {
    stats: crate::corpus::CorpusStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    frequency_ratios: Option<Vec<crate::corpus::FrequencyRatio>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bands: Option<BTreeMap<String, BTreeSet<String>>>,
}

fn cmd_stats(manifest: &Path, after: Option<&Path>, bands_out: Option<&Path>, out: &mut dyn Write) -> Outcome {
    let before = load_corpus(manifest)?;
    let stats = corpus_stats(&before).map_err(|e| Failure(EXIT_FAILURE, e.to_string()))?;
    let (ratios, bands) = match after {
        Some(path) => {
            let after = load_corpus(path)?;
            let ratios = frequency_ratios(&before, &after);
            let bands = standard_bands(&ratios);
            (Some(ratios), Some(bands))
        }
        None => (None, None),
    };
    if let Some(path) = bands_out {
        let bands = bands.as_ref().ok_or_else(|| config_error("--bands needs --after"))?;
        let json = serde_json::to_string_pretty(bands).expect("bands serialize");
        fs::write(path, json).map_err(|e| Failure(EXIT_FAILURE, format!("{}: {e}", path.display())))?;
    }
    let dump = StatsOutput {
        stats,
        frequency_ratios: ratios,
        bands,
    };
    writeln!(out, "{}", serde_json::to_string_pretty(&dump).expect("stats serialize"))
        .map_err(|e| Failure(EXIT_FAILURE, e.to_string()))
}

fn cmd_build(args: BuildArgs, cfg: &RunConfig, out: &mut dyn Write) -> Outcome {
    let manifest = pick(args.manifest, &cfg.corpus.manifest, "--manifest")?;
    let out_root = pick(args.out, &cfg.pipeline.out, "--out")?;
    let seed = args
        .seed
        .or(cfg.pipeline.seed)
        .ok_or_else(|| config_error("missing --seed (there is no default seed)"))?;
    let strategy_name = args
        .strategy
        .or_else(|| cfg.pipeline.strategy.clone())
        .ok_or_else(|| config_error("missing --strategy"))?;
    let strategies: Vec<Strategy> = if strategy_name == "all" {
        Strategy::ALL.to_vec()
    } else {
        vec![strategy_name.parse().map_err(config_error)?]
    };
    let miss_policy = match args.miss_policy.as_deref() {
        None => cfg.splice.miss_policy,
        Some(s) => serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| config_error(format!("unknown miss policy {s:?}")))?,
    };
    let workers = args
        .workers
        .or(cfg.pipeline.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let lexicon = match args.lexicons.or_else(|| cfg.corpus.lexicons.clone()) {
        Some(dir) => Lexicon::load_dir(&dir).map_err(|e| config_error(e.to_string()))?,
        None => Lexicon::builtin(),
    };
    let mut tts = cfg.tts.engine.clone();
    if let Some(endpoint) = args.tts_endpoint {
        tts.endpoint = Some(endpoint);
    }
    let use_stub = args.tts_stub || cfg.tts.stub || tts.endpoint.is_none();
    let stub = StubSynthesizer::with_rate(tts.sample_rate);
    let http;
    let (synthesizer, label): (&dyn Synthesizer, String) = if use_stub {
        tts.endpoint = None;
        (&stub, "stub".into())
    } else {
        let endpoint = tts.endpoint.clone().expect("endpoint present");
        http = HttpSynthesizer::new(endpoint.clone(), &tts);
        (&http, endpoint)
    };

    let corpus = load_corpus(&manifest)?;
    let audit = match args.audit {
        Some(path) => Some(audit_phrases(&load_corpus(&path)?)),
        None => None,
    };
    let mut violations = Vec::new();
    for strategy in strategies {
        let opts = BuildOptions {
            strategy,
            seed,
            surrogate: cfg.surrogate.clone(),
            miss_policy,
            tts: tts.clone(),
            synthesizer,
            synthesizer_label: label.clone(),
            lexicon: &lexicon,
            workers,
        };
        let result = build(&corpus, &opts, &out_root).map_err(|e| Failure(EXIT_FAILURE, e.to_string()))?;
        json_line(out, &result.report)?;
        if let (Some(phrases), true) = (&audit, strategy != Strategy::BaselineId) {
            for v in verify_privacy(&result.output, phrases) {
                violations.push((strategy, v));
            }
        }
    }
    if violations.is_empty() {
        return Ok(());
    }
    for (strategy, v) in &violations {
        json_line(
            out,
            &serde_json::json!({
                "strategy": strategy,
                "conversation": v.conversation,
                "turn": v.turn,
                "violation": "original PII phrase in output",
            }),
        )?;
    }
    Err(Failure(EXIT_PRIVACY, format!("{} privacy violation(s)", violations.len())))
}

fn cmd_index(manifest: &Path, path: &Path, out: &mut dyn Write) -> Outcome {
    let corpus = load_corpus(manifest)?;
    let index = build_index(&corpus);
    index.save(path).map_err(|e| Failure(EXIT_FAILURE, e.to_string()))?;
    json_line(
        out,
        &serde_json::json!({"types": index.tokens().count(), "occurrences": index.len(), "path": path}),
    )
}

fn cmd_score(
    manifest: &Path,
    hyp: &Path,
    lexicons: Option<&Path>,
    bands: Option<&Path>,
    report_out: Option<&Path>,
    out: &mut dyn Write,
) -> Outcome {
    let reference = load_corpus(manifest)?;
    let lexicons = match lexicons {
        Some(dir) => EvalLexicons::load_dir(dir).map_err(|e| config_error(e.to_string()))?,
        None => EvalLexicons::builtin(),
    };
    let bands: BTreeMap<String, BTreeSet<String>> = match bands {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?
        }
        None => BTreeMap::new(),
    };
    let hyps = load_hypotheses(hyp).map_err(|e| Failure(EXIT_FAILURE, e.to_string()))?;
    let report = score(&reference, &hyps, &lexicons, &bands).map_err(|e| Failure(EXIT_FAILURE, e.to_string()))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Some(path) = report_out {
        fs::write(path, format!("{json}\n")).map_err(|e| Failure(EXIT_FAILURE, format!("{}: {e}", path.display())))?;
    }
    write!(out, "{}", render_table(&report)).map_err(|e| Failure(EXIT_FAILURE, e.to_string()))
}

/// Runs the command line `args` (program name first). Results go to `out`,
/// error messages to `err`; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let result = load_config(cli.config.as_deref()).and_then(|cfg| match cli.command {
        Command::Validate { manifest } => cmd_validate(&pick(manifest, &cfg.corpus.manifest, "--manifest")?, out),
        Command::Stats { manifest, after, bands } => cmd_stats(
            &pick(manifest, &cfg.corpus.manifest, "--manifest")?,
            after.as_deref(),
            bands.as_deref(),
            out,
        ),
        Command::Build(args) => cmd_build(args, &cfg, out),
        Command::Index { manifest, out: path } => {
            cmd_index(&pick(manifest, &cfg.corpus.manifest, "--manifest")?, &path, out)
        }
        Command::Score {
            manifest,
            hyp,
            lexicons,
            bands,
            out: report,
        } => cmd_score(
            &pick(manifest, &cfg.corpus.manifest, "--manifest")?,
            &hyp,
            lexicons.or_else(|| cfg.corpus.eval_lexicons.clone()).as_deref(),
            bands.as_deref(),
            report.as_deref(),
            out,
        ),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure(code, message)) => {
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}
