//! JSONL sample and raw-question files.
//!
//! Every line holds one object. Unknown fields are rejected, and every
//! error names the offending line.

use std::fs;
use std::path::Path;

use cqg_core::kg::{Grounding, Node, NodeRole, QueryGraph, Triple};
use cqg_core::preprocess::{RawItem, Sample};
use cqg_core::text::{parse_tokens, surfaces};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeJson {
    pub id: String,
    pub role: String,
    pub entity_type: String,
    pub type_name: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundedJson {
    /// Id of the terminal node.
    pub node: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleJson {
    pub s: String,
    pub p: String,
    pub p_name: Vec<String>,
    pub p_inv_name: Vec<String>,
    pub o: String,
    pub grounded: Option<GroundedJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphJson {
    pub nodes: Vec<NodeJson>,
    pub triples: Vec<TripleJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleJson {
    pub graph: GraphJson,
    pub references: Vec<Vec<String>>,
    pub subquestion: Option<Vec<String>>,
    #[serde(default)]
    pub pseudo_pool_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawQuestionJson {
    pub graph: GraphJson,
    pub question: String,
}

/// One line of a raw corpus: an unprocessed question, optionally with the
/// sub-question written for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawJson {
    pub graph: GraphJson,
    pub question: String,
    #[serde(default)]
    pub subquestion: Option<RawQuestionJson>,
}

impl From<&QueryGraph> for GraphJson {
    fn from(g: &QueryGraph) -> Self {
        let id = |n: usize| g.nodes[n].id.clone();
        GraphJson {
            nodes: g
                .nodes
                .iter()
                .map(|n| NodeJson {
                    id: n.id.clone(),
                    role: n.role.as_str().into(),
                    entity_type: n.entity_type.clone(),
                    type_name: n.type_name.clone(),
                })
                .collect(),
            triples: g
                .triples
                .iter()
                .map(|t| TripleJson {
                    s: id(t.subject),
                    p: t.predicate.clone(),
                    p_name: t.predicate_name.clone(),
                    p_inv_name: t.inverse_name.clone(),
                    o: id(t.object),
                    grounded: t.grounded.as_ref().map(|gr| GroundedJson {
                        node: id(gr.node),
                        name: gr.name.clone(),
                    }),
                })
                .collect(),
        }
    }
}

impl TryFrom<GraphJson> for QueryGraph {
    type Error = String;

    fn try_from(j: GraphJson) -> Result<Self, String> {
        let mut nodes = Vec::with_capacity(j.nodes.len());
        for n in j.nodes {
            let role = NodeRole::parse(&n.role).ok_or_else(|| format!("unknown node role {:?}", n.role))?;
            nodes.push(Node {
                id: n.id,
                role,
                entity_type: n.entity_type,
                type_name: n.type_name,
            });
        }
        let index = |id: &str| -> Result<usize, String> {
            nodes
                .iter()
                .position(|n| n.id == id)
                .ok_or_else(|| format!("triple references unknown node {id:?}"))
        };
        let mut triples = Vec::with_capacity(j.triples.len());
        for t in j.triples {
            let grounded = match t.grounded {
                Some(gr) => Some(Grounding {
                    node: index(&gr.node)?,
                    name: gr.name,
                }),
                None => None,
            };
            triples.push(Triple {
                subject: index(&t.s)?,
                predicate: t.p,
                predicate_name: t.p_name,
                inverse_name: t.p_inv_name,
                object: index(&t.o)?,
                grounded,
            });
        }
        let g = QueryGraph { nodes, triples };
        g.validate().map_err(|e| e.to_string())?;
        Ok(g)
    }
}

impl From<&Sample> for SampleJson {
    fn from(s: &Sample) -> Self {
        SampleJson {
            graph: (&s.graph).into(),
            references: s.references.iter().map(|r| surfaces(r)).collect(),
            subquestion: s.subquestion.as_ref().map(|q| surfaces(q)),
            pseudo_pool_ids: s.pseudo_pool.clone(),
        }
    }
}

impl TryFrom<SampleJson> for Sample {
    type Error = String;

    fn try_from(j: SampleJson) -> Result<Self, String> {
        let s = Sample {
            graph: j.graph.try_into()?,
            references: j.references.iter().map(|r| parse_tokens(r)).collect(),
            subquestion: j.subquestion.as_deref().map(parse_tokens),
            pseudo_pool: j.pseudo_pool_ids,
        };
        s.check().map_err(|e| e.to_string())?;
        Ok(s)
    }
}

impl From<&RawItem> for RawJson {
    fn from(r: &RawItem) -> Self {
        RawJson {
            graph: (&r.graph).into(),
            question: r.question.clone(),
            subquestion: r.subquestion.as_ref().map(|(g, q)| RawQuestionJson {
                graph: g.into(),
                question: q.clone(),
            }),
        }
    }
}

impl TryFrom<RawJson> for RawItem {
    type Error = String;

    fn try_from(j: RawJson) -> Result<Self, String> {
        let subquestion = match j.subquestion {
            Some(q) => Some((q.graph.try_into()?, q.question)),
            None => None,
        };
        Ok(RawItem {
            graph: j.graph.try_into()?,
            question: j.question,
            subquestion,
        })
    }
}

/// Parses JSONL text, converting each line with `TryFrom`. Blank lines are
/// skipped; `path` only labels errors.
pub fn parse_jsonl<J, T>(text: &str, path: &Path) -> Result<Vec<T>>
where
    J: DeserializeOwned,
    T: TryFrom<J, Error = String>,
{
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let j: J = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        out.push(T::try_from(j).map_err(err)?);
    }
    Ok(out)
}

/// One compact JSON object per line.
pub fn to_jsonl<'a, J, T>(items: impl IntoIterator<Item = &'a T>) -> String
where
    J: Serialize + From<&'a T>,
    T: 'a,
{
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&J::from(item)).expect("serializable"));
        out.push('\n');
    }
    out
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_samples(path: &Path) -> Result<Vec<Sample>> {
    parse_jsonl::<SampleJson, Sample>(&read_text(path)?, path)
}

pub fn save_samples(path: &Path, samples: &[Sample]) -> Result<()> {
    write_text(path, &to_jsonl::<SampleJson, Sample>(samples))
}

pub fn load_raw(path: &Path) -> Result<Vec<RawItem>> {
    parse_jsonl::<RawJson, RawItem>(&read_text(path)?, path)
}

pub fn save_raw(path: &Path, items: &[RawItem]) -> Result<()> {
    write_text(path, &to_jsonl::<RawJson, RawItem>(items))
}
