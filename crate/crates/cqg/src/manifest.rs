//! Run manifests: what went into a command and what came out.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timings {
    pub started_unix_ms: u128,
    pub elapsed_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Effective settings of the command.
    pub config: serde_json::Value,
    /// Content hash of every input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    /// Hash over all input hashes in key order.
    pub inputs_hash: String,
    pub outputs: BTreeMap<String, String>,
    pub timings: Timings,
}

/// Git-style blob hash (`blob <len>\0` prefix) using SHA-256.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(content_hash(&bytes))
}

fn hash_files(paths: &[PathBuf]) -> Result<BTreeMap<String, String>> {
    paths
        .iter()
        .map(|p| Ok((p.display().to_string(), file_hash(p)?)))
        .collect()
}

/// Where the manifest of a command writing `out` goes: inside `out` when it
/// is a directory, otherwise next to it as `<stem>.manifest.json`.
pub fn manifest_path(out: &Path, out_is_dir: bool) -> PathBuf {
    if out_is_dir {
        out.join("manifest.json")
    } else {
        let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        out.with_file_name(format!("{stem}.manifest.json"))
    }
}

/// Collects input/output hashes and writes the manifest.
pub struct ManifestBuilder {
    command: String,
    seed: u64,
    config: serde_json::Value,
    started: std::time::SystemTime,
    clock: std::time::Instant,
}

impl ManifestBuilder {
    pub fn start(command: &str, seed: u64, config: serde_json::Value) -> Self {
        ManifestBuilder {
            command: command.into(),
            seed,
            config,
            started: std::time::SystemTime::now(),
            clock: std::time::Instant::now(),
        }
    }

    pub fn finish(self, inputs: &[PathBuf], outputs: &[PathBuf], path: &Path) -> Result<RunManifest> {
        let inputs = hash_files(inputs)?;
        let joined: String = inputs.iter().map(|(k, v)| format!("{k}\t{v}\n")).collect();
        let m = RunManifest {
            tool: "cqg".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command,
            seed: self.seed,
            config: self.config,
            inputs_hash: content_hash(joined.as_bytes()),
            inputs,
            outputs: hash_files(outputs)?,
            timings: Timings {
                started_unix_ms: self
                    .started
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_millis())
                    .unwrap_or(0),
                elapsed_ms: self.clock.elapsed().as_millis(),
            },
        };
        let text = serde_json::to_string_pretty(&m).expect("serializable") + "\n";
        crate::format::write_text(path, &text)?;
        Ok(m)
    }
}
