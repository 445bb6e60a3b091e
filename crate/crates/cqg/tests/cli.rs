mod common;

use std::path::Path;

use common::{cqg, expect, files, is_manifest, pipeline, SMALL_CONFIG};
use serde_json::Value;

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn jsonl(p: &Path) -> Vec<Value> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn help_version_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let v = expect(d, &["--version"], 0);
    assert!(String::from_utf8_lossy(&v.stdout).starts_with("cqg "));
    for sub in ["preprocess", "synth", "train", "generate", "evaluate"] {
        let h = expect(d, &[sub, "--help"], 0);
        assert!(String::from_utf8_lossy(&h.stdout).contains("--seed"), "{sub} lacks --seed");
    }
    expect(d, &["bogus"], 2);
    expect(d, &["train", "--data", "x"], 2);
    expect(d, &["synth", "--out", "c", "--ratios", "0.5,0.5"], 2);
    expect(d, &["synth", "--out", "c", "--ratios", "0.5,0.2,0.2"], 2);
}

#[test]
fn data_errors_exit_with_one_and_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    expect(d, &["synth", "--out", "corpus", "--graphs", "6", "--predicates", "8"], 0);
    let raw = std::fs::read_to_string(d.join("corpus/raw.jsonl")).unwrap();
    let mut lines: Vec<&str> = raw.lines().collect();
    let cut = &lines[2][..20];
    lines[2] = cut;
    std::fs::write(d.join("bad.jsonl"), lines.join("\n")).unwrap();
    let out = expect(d, &["preprocess", "--in", "bad.jsonl", "--out", "pre"], 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("ERROR error="), "{err}");
    assert!(err.contains("bad.jsonl:3:"), "{err}");
    expect(d, &["preprocess", "--in", "missing.jsonl", "--out", "pre"], 1);
}

#[test]
fn unknown_config_keys_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    expect(d, &["synth", "--out", "corpus", "--graphs", "6", "--predicates", "8"], 0);
    std::fs::write(d.join("cfg.json"), r#"{"lr": 0.1, "learning_rate": 0.1}"#).unwrap();
    let out = expect(d, &["train", "--model", "cog2q", "--config", "cfg.json", "--data", "corpus", "--out", "run"], 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
    std::fs::write(d.join("cfg.json"), r#"{"lr_decay": 1.5}"#).unwrap();
    expect(d, &["train", "--model", "cog2q", "--config", "cfg.json", "--data", "corpus", "--out", "run"], 2);
    expect(d, &["train", "--model", "g2s", "--data", "corpus", "--out", "run"], 2);
}

#[test]
fn preprocessing_the_raw_corpus_reproduces_synth_splits() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    expect(d, &["synth", "--out", "corpus", "--seed", "21", "--graphs", "12", "--predicates", "9"], 0);
    expect(d, &["preprocess", "--in", "corpus/raw.jsonl", "--out", "pre", "--seed", "21"], 0);
    for f in ["train", "dev", "test", "simple"] {
        let a = std::fs::read(d.join(format!("corpus/{f}.jsonl"))).unwrap();
        let b = std::fs::read(d.join(format!("pre/{f}.jsonl"))).unwrap();
        assert_eq!(a, b, "{f}.jsonl differs");
    }
    expect(d, &["preprocess", "--in", "corpus/raw.jsonl", "--out", "pre2", "--seed", "22"], 0);
    let a = std::fs::read(d.join("pre/train.jsonl")).unwrap();
    let b = std::fs::read(d.join("pre2/train.jsonl")).unwrap();
    assert_ne!(a, b, "the split seed has no effect");
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d, SMALL_CONFIG);

    // One manifest per output location.
    for run in ["corpus", "pre", "run", "runsub"] {
        let m: Vec<_> = files(&d.join(run)).into_iter().filter(|p| is_manifest(p)).collect();
        assert_eq!(m.len(), 1, "{run}: {m:?}");
    }
    let manifest = read_json(&d.join("run/manifest.json"));
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["seed"], 3);
    assert!(manifest["inputs"]["corpus/train.jsonl"].is_string());
    assert!(manifest["outputs"]["run/best.cqg"].is_string());

    let report = read_json(&d.join("run/train_report.json"));
    assert_eq!(report["best_checkpoint"], "best.cqg");
    assert!(report["epochs"].as_array().unwrap().len() > 1);

    // Placeholder substitution of memorized questions.
    let plain = jsonl(&d.join("gen/plain.jsonl"));
    let surface = jsonl(&d.join("gen/surface.jsonl"));
    let samples = cqg::format::load_samples(&d.join("corpus/train.jsonl")).unwrap();
    let mut replaced = 0;
    for (p, s) in plain.iter().zip(&surface) {
        assert_eq!(p["sample_id"], s["sample_id"]);
        let graph = &samples[p["sample_id"].as_u64().unwrap() as usize].graph;
        let (pt, st) = (p["generated"].as_array().unwrap(), s["generated"].as_array().unwrap());
        assert_eq!(pt.len(), st.len());
        for (a, b) in pt.iter().zip(st) {
            let a = a.as_str().unwrap();
            match cqg_core::text::Token::parse(a) {
                cqg_core::text::Token::Placeholder(Some(k)) => {
                    let name = graph.triples[k].grounded.as_ref().unwrap().name.to_lowercase();
                    assert_eq!(b.as_str().unwrap(), name);
                    replaced += 1;
                }
                _ => assert_eq!(a, b.as_str().unwrap()),
            }
        }
        assert!(p.get("scores_a_m").is_none());
        assert_eq!(p["used_subquestions"], Value::Array(vec![]));
    }
    assert!(replaced > 0, "no placeholder was generated");

    let sub = jsonl(&d.join("gen/sub.jsonl"));
    assert!(!sub.is_empty());
    assert!(sub.iter().all(|l| l["used_subquestions"].as_array().unwrap().len() == 1));

    // A deterministic model has no spread over runs.
    let r = read_json(&d.join("eval/cog2q.json"));
    assert_eq!(r["bleu"].as_array().unwrap().len(), 4);
    assert_eq!(r["runs"].as_array().unwrap().len(), 3);
    assert!(r["stddev"]["bleu"].as_array().unwrap().iter().all(|x| x.as_f64() == Some(0.0)));
    assert_eq!(r["stddev"]["rouge_l"].as_f64(), Some(0.0));
    for x in r["bleu"].as_array().unwrap().iter().chain([&r["rouge_l"]]) {
        assert!((0.0..=100.0).contains(&x.as_f64().unwrap()));
    }
    assert!(!r["per_sample"].as_array().unwrap().is_empty());
    assert!(d.join("eval/cog2q.manifest.json").exists());
    assert_eq!(read_json(&d.join("eval/sub.json"))["subq"], "random_pseudo");

    // Incompatible decoding modes.
    expect(d, &["generate", "--checkpoint", "runsub/best.cqg", "--data", "corpus/test.jsonl", "--subq", "none"], 2);
    expect(d, &["generate", "--checkpoint", "run/best.cqg", "--data", "corpus/test.jsonl", "--subq", "corresponding"], 2);
    expect(d, &["evaluate", "--checkpoint", "run/best.cqg", "--data", "corpus/test.jsonl", "--runs", "0", "--out", "x.json"], 2);
    let corresponding = expect(d, &["generate", "--checkpoint", "runsub/best.cqg", "--data", "corpus/test.jsonl", "--subq", "corresponding"], 0);
    assert!(!corresponding.stdout.is_empty());

    // Structured logging.
    let log = cqg(d, &["evaluate", "--checkpoint", "run/best.cqg", "--data", "corpus/test.jsonl", "--runs", "1", "--out", "e.json"]);
    for line in String::from_utf8_lossy(&log.stderr).lines() {
        let mut parts = line.split(' ');
        assert!(matches!(parts.next(), Some("INFO" | "WARN" | "ERROR")), "{line}");
        assert!(parts.all(|kv| kv.contains('=')), "{line}");
    }
}
