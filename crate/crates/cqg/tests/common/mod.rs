#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// Runs the `cqg` binary inside `dir`.
pub fn cqg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqg"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("cqg binary runs")
}

/// Runs `cqg` and panics with its stderr unless it exits with `code`.
pub fn expect(dir: &Path, args: &[&str], code: i32) -> Output {
    let out = cqg(dir, args);
    assert_eq!(
        out.status.code(),
        Some(code),
        "cqg {}\n{}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Every regular file below `dir`, relative and sorted.
pub fn files(dir: &Path) -> Vec<PathBuf> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

pub fn is_manifest(p: &Path) -> bool {
    p.file_name().unwrap().to_string_lossy().ends_with("manifest.json")
}

/// Small model dimensions that still memorize a handful of questions.
pub const SMALL_CONFIG: &str = r#"{
  "lr": 0.01, "lambda_l2": 0.0, "max_epochs": 150, "patience": 150,
  "embed_dim": 16, "name_dim": 16, "relation_dim": 16, "tree_dim": 16,
  "dec_dim": 16, "subq_dim": 16, "attn_dim": 16, "m": 2, "max_len": 20
}"#;

/// synth, then training of a CoG2Q and an initialized CoGSub2Q model, then
/// generation and evaluation, all inside `dir`.
pub fn pipeline(dir: &Path, config: &str) {
    std::fs::write(dir.join("cfg.json"), config).unwrap();
    expect(dir, &["synth", "--out", "corpus", "--seed", "5", "--graphs", "10", "--predicates", "10", "--ratios", "0.6,0.2,0.2"], 0);
    expect(dir, &["preprocess", "--in", "corpus/raw.jsonl", "--out", "pre", "--seed", "5", "--ratios", "0.6,0.2,0.2"], 0);
    expect(dir, &["train", "--model", "cog2q", "--config", "cfg.json", "--data", "corpus", "--out", "run", "--seed", "3"], 0);
    expect(dir, &["train", "--model", "cogsub2q", "--config", "cfg.json", "--data", "corpus", "--init", "run/best.cqg", "--out", "runsub", "--seed", "3"], 0);
    expect(dir, &["generate", "--checkpoint", "run/best.cqg", "--data", "corpus/train.jsonl", "--out", "gen/plain.jsonl"], 0);
    expect(dir, &["generate", "--checkpoint", "run/best.cqg", "--data", "corpus/train.jsonl", "--surface", "--out", "gen/surface.jsonl"], 0);
    expect(dir, &["generate", "--checkpoint", "runsub/best.cqg", "--data", "corpus/test.jsonl", "--seed", "9", "--out", "gen/sub.jsonl"], 0);
    expect(dir, &["evaluate", "--checkpoint", "run/best.cqg", "--data", "corpus/test.jsonl", "--runs", "3", "--out", "eval/cog2q.json"], 0);
    expect(dir, &["evaluate", "--checkpoint", "runsub/best.cqg", "--data", "corpus/test.jsonl", "--runs", "3", "--seed", "4", "--out", "eval/sub.json"], 0);
}
