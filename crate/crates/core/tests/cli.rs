mod common;

use std::fs;
use std::path::Path;

use deidforge::cli::{run, EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, EXIT_PRIVACY};
use deidforge::corpus::{save_manifest, Category, PiiSpan};
use deidforge::splice::SpliceIndex;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["deidforge"];
    argv.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn validate_reports_broken_spans() {
    let fx = common::generate(3, &common::FixtureSpec::default());
    let (code, out, _) = call(&["validate", "--manifest", p(&fx.manifest)]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.is_empty());

    let mut broken = fx.corpus.clone();
    let turn = broken[0].turns.iter_mut().find(|t| t.has_pii()).expect("a pii turn");
    turn.pii_spans[0].last_token = turn.tokens.len() + 3;
    let span_id = turn.pii_spans[0].id.clone();
    let bad = fx.path().join("broken.jsonl");
    save_manifest(&broken, &bad).unwrap();
    let (code, out, _) = call(&["validate", "--manifest", p(&bad)]);
    assert_eq!(code, EXIT_FAILURE);
    let first: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert!(first.to_string().contains(&span_id), "{first}");
    assert!(first.to_string().contains(&broken[0].id), "{first}");
}

#[test]
fn missing_inputs_are_config_errors() {
    let fx = common::generate(4, &common::FixtureSpec::default());
    let out = fx.path().join("out");
    let (code, _, err) = call(&["build", "--manifest", p(&fx.manifest), "--out", p(&out), "--strategy", "B1"]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("seed"), "{err}");

    let (code, _, _) = call(&["stats", "--manifest", "/nonexistent/manifest.jsonl"]);
    assert_eq!(code, EXIT_CONFIG);
    let (code, stdout, _) = call(&["validate", "--manifest", "/nonexistent/manifest.jsonl"]);
    assert_eq!(code, EXIT_FAILURE);
    assert!(!stdout.is_empty());

    let (code, _, _) = call(&[
        "build", "--manifest", p(&fx.manifest), "--out", p(&out), "--strategy", "nope", "--seed", "1",
    ]);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn config_file_supplies_build_settings() {
    let fx = common::generate(6, &common::FixtureSpec::default());
    let cfg = fx.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"corpus": {"manifest": "manifest.jsonl"},
            "pipeline": {"out": "cfg-out", "strategy": "tts-token", "seed": 5, "workers": 2},
            "tts": {"stub": true}}"#,
    )
    .unwrap();
    let (code, out, err) = call(&["build", "--config", p(&cfg)]);
    assert_eq!(code, EXIT_OK, "{err}");
    let report: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(report["seed"], 5);
    assert!(fx.path().join("cfg-out/tts-token/manifest.jsonl").is_file());

    fs::write(&cfg, r#"{"pipeline": {"sede": 5}}"#).unwrap();
    let (code, _, _) = call(&["build", "--config", p(&cfg)]);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn audit_failure_exits_with_privacy_code() {
    let fx = common::generate(9, &common::FixtureSpec::default());
    // An audit manifest that marks a word spoken in a PII-free turn as a name.
    let mut audit = vec![fx.corpus[0].clone()];
    let turn = audit[0].turns.iter().find(|t| !t.has_pii()).unwrap();
    let word = turn.tokens[0].text.clone();
    let mut turn = turn.clone();
    turn.tokens[0].pii = Some("x".into());
    turn.pii_spans = vec![PiiSpan { id: "x".into(), category: Category::PersonName, first_token: 0, last_token: 0 }];
    for t in &mut turn.tokens[1..] {
        t.text = "zzz".into();
    }
    audit[0].turns = vec![turn];
    audit[0].audio = fx.path().join(&audit[0].audio);
    let audit_path = fx.path().join("audit.jsonl");
    save_manifest(&audit, &audit_path).unwrap();

    let out = fx.path().join("out");
    let (code, stdout, _) = call(&[
        "build", "--manifest", p(&fx.manifest), "--out", p(&out), "--strategy", "baseline-turn", "--seed", "1",
        "--audit", p(&audit_path),
    ]);
    assert_eq!(code, EXIT_PRIVACY, "{word}: {stdout}");
    assert!(stdout.contains("violation"));
}

#[test]
fn index_and_stats_commands() {
    let fx = common::generate(12, &common::FixtureSpec::default());
    let idx = fx.path().join("index.jsonl");
    let (code, out, err) = call(&["index", "--manifest", p(&fx.manifest), "--out", p(&idx)]);
    assert_eq!(code, EXIT_OK, "{err}");
    let summary: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    let loaded = SpliceIndex::load(&idx).unwrap();
    assert_eq!(summary["occurrences"], loaded.len());

    let build_out = fx.path().join("out");
    let (code, _, err) = call(&[
        "build", "--manifest", p(&fx.manifest), "--out", p(&build_out), "--strategy", "B3", "--seed", "2",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let bands = fx.path().join("bands.json");
    let after = build_out.join("baseline-token/manifest.jsonl");
    let (code, out, err) =
        call(&["stats", "--manifest", p(&fx.manifest), "--after", p(&after), "--bands", p(&bands)]);
    assert_eq!(code, EXIT_OK, "{err}");
    let dump: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(dump["stats"]["pii_token_fraction"].as_f64().unwrap() > 0.0);
    assert!(dump["bands"].is_object());
    assert!(bands.is_file());

    let (code, _, _) = call(&["stats", "--manifest", p(&fx.manifest), "--bands", p(&bands)]);
    assert_eq!(code, EXIT_CONFIG);
}
