//! Versioned model checkpoints.
//!
//! Layout: the magic line `CQGKIT1`, one line of JSON header, then for every
//! parameter in header order its values, first moments and second moments
//! as little-endian `f64`.

use std::path::Path;

use cqg_core::model::Model;
use cqg_core::vocab::{FeatureTables, SymbolTable, UNK};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ModelSpec;
use crate::error::{Error, Result};

pub const MAGIC: &[u8] = b"CQGKIT1\n";
const FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamHeader {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format: u32,
    pub model: ModelSpec,
    pub words: Vec<String>,
    pub entity_types: Vec<String>,
    pub predicates: Vec<String>,
    /// Seed the parameters were initialized from.
    pub seed: u64,
    /// Adam updates applied.
    pub step: u64,
    /// SHA-256 over the model configuration and symbol tables.
    pub config_hash: String,
    pub params: Vec<ParamHeader>,
}

/// Hash identifying a model configuration together with its symbol tables.
pub fn config_hash(spec: &ModelSpec, tables: &FeatureTables) -> String {
    let canonical = serde_json::to_string(&(
        spec,
        tables.words.symbols(),
        tables.entity_types.symbols(),
        tables.predicates.symbols(),
    ))
    .expect("serializable");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

pub fn to_bytes(model: &Model) -> Vec<u8> {
    let spec = ModelSpec::from(&model.config);
    let header = Header {
        format: FORMAT,
        config_hash: config_hash(&spec, &model.tables),
        model: spec,
        words: model.tables.words.symbols().to_vec(),
        entity_types: model.tables.entity_types.symbols().to_vec(),
        predicates: model.tables.predicates.symbols().to_vec(),
        seed: model.store.seed(),
        step: model.store.step(),
        params: model
            .store
            .iter()
            .map(|p| ParamHeader {
                name: p.name().into(),
                shape: p.shape().to_vec(),
            })
            .collect(),
    };
    let mut out = MAGIC.to_vec();
    out.extend(serde_json::to_vec(&header).expect("serializable"));
    out.push(b'\n');
    for p in model.store.iter() {
        for x in p.value().data().iter().chain(p.first_moment()).chain(p.second_moment()) {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

/// Parses a checkpoint; `path` only labels errors.
pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Model> {
    let err = |message: String| Error::Checkpoint {
        path: path.to_path_buf(),
        message,
    };
    let rest = bytes
        .strip_prefix(MAGIC)
        .ok_or_else(|| err("missing CQGKIT1 header".into()))?;
    let end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| err("truncated header".into()))?;
    let header: Header = serde_json::from_slice(&rest[..end]).map_err(|e| err(e.to_string()))?;
    if header.format != FORMAT {
        return Err(err(format!("unsupported format version {}", header.format)));
    }
    let tables = FeatureTables {
        words: SymbolTable::from_symbols(header.words.clone(), UNK),
        entity_types: SymbolTable::from_symbols(header.entity_types.clone(), 0),
        predicates: SymbolTable::from_symbols(header.predicates.clone(), 0),
    };
    if config_hash(&header.model, &tables) != header.config_hash {
        return Err(err("config hash does not match the header".into()));
    }
    let config = header.model.to_config()?;
    let mut model = Model::new(config, tables, header.seed)?;
    let expected: Vec<ParamHeader> = model
        .store
        .iter()
        .map(|p| ParamHeader {
            name: p.name().into(),
            shape: p.shape().to_vec(),
        })
        .collect();
    if expected != header.params {
        return Err(err("parameter list does not match the model configuration".into()));
    }
    let mut data = rest[end + 1..].chunks_exact(8);
    if data.len() != 3 * model.store.num_values() || !data.remainder().is_empty() {
        return Err(err(format!(
            "expected {} values, found {} bytes",
            3 * model.store.num_values(),
            rest.len() - end - 1
        )));
    }
    let mut take = |n: usize| -> Vec<f64> {
        (&mut data)
            .take(n)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect()
    };
    for p in &header.params {
        let n = p.shape.iter().product();
        let (v, m, s) = (take(n), take(n), take(n));
        model.store.restore(&p.name, v, m, s)?;
    }
    model.store.set_step(header.step);
    Ok(model)
}

pub fn save(path: &Path, model: &Model) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, path)
}
