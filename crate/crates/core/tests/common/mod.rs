#![allow(dead_code)]

pub mod checks;
pub mod oracles;

use cqg_core::model::{Ablation, Model, ModelConfig, Variant};
use cqg_core::preprocess::Sample;
use cqg_core::synth::generate_synthetic_corpus;
use cqg_core::text::{Token, TokenSequence};
use cqg_core::vocab::FeatureTables;

pub fn corpus(seed: u64, n: usize, preds: usize) -> (Vec<Sample>, Vec<Sample>) {
    generate_synthetic_corpus(seed, n, preds).unwrap()
}

pub fn tables(samples: &[Sample], simple: &[Sample]) -> FeatureTables {
    let questions: Vec<&[Token]> = samples
        .iter()
        .flat_map(|s| s.references.iter().chain(s.subquestion.iter()))
        .chain(simple.iter().flat_map(|s| s.references.iter()))
        .map(|q| q.as_slice())
        .collect();
    FeatureTables::build(
        samples.iter().chain(simple).map(|s| &s.graph),
        questions,
    )
}

pub fn model(variant: Variant, ablation: Ablation, tables: &FeatureTables, seed: u64) -> Model {
    let config = ModelConfig {
        ablation,
        ..ModelConfig::tiny(variant)
    };
    Model::new(config, tables.clone(), seed).unwrap()
}

/// Sub-questions a variant consumes for `s`: the paired one, the first `m`
/// pool entries, or none.
pub fn subquestions(variant: Variant, s: &Sample, simple: &[Sample], m: usize) -> Vec<TokenSequence> {
    match variant {
        Variant::Cogsub2q => vec![s.subquestion.clone().unwrap()],
        Variant::Cogsubm2q => s
            .pseudo_pool
            .iter()
            .take(m)
            .map(|&i| simple[i].references[0].iter().map(Token::unindexed).collect())
            .collect(),
        _ => Vec::new(),
    }
}

pub fn ablations() -> Vec<(&'static str, Ablation)> {
    vec![
        ("full", Ablation::default()),
        (
            "no_attention",
            Ablation {
                no_attention: true,
                ..Default::default()
            },
        ),
        (
            "no_inverse_predicate",
            Ablation {
                no_inverse_predicate: true,
                ..Default::default()
            },
        ),
        (
            "no_names",
            Ablation {
                no_names: true,
                ..Default::default()
            },
        ),
    ]
}

use cqg_core::kg::{Grounding, Node, NodeRole, QueryGraph, Triple};
use rand::seq::SliceRandom;
use rand::Rng;

const TYPES: [&str; 3] = ["person", "film", "city"];

fn triple(s: usize, p: String, o: usize, nodes: &[Node]) -> Triple {
    let grounded = [s, o]
        .into_iter()
        .find(|&n| nodes[n].role == NodeRole::Terminal)
        .map(|n| Grounding {
            node: n,
            name: nodes[n].id.replace('_', " "),
        });
    Triple {
        subject: s,
        predicate_name: vec![p.clone()],
        inverse_name: vec!["inv".into(), p.clone()],
        predicate: p,
        object: o,
        grounded,
    }
}

/// A random valid graph with `k` triples grown as a tree from the question
/// node, plus `extra` triples between existing non-terminal nodes.
pub fn random_graph(rng: &mut impl Rng, k: usize, extra: usize, preds: usize, entities: usize) -> QueryGraph {
    let mut nodes = vec![Node {
        id: "q".into(),
        role: NodeRole::Question,
        entity_type: TYPES[rng.gen_range(0..3)].into(),
        type_name: vec![],
    }];
    nodes[0].type_name = vec![nodes[0].entity_type.clone()];
    let mut triples = Vec::new();
    let mut pool: Vec<usize> = (0..entities).collect();
    pool.shuffle(rng);
    for i in 0..k {
        let inner: Vec<usize> = (0..nodes.len()).filter(|&n| nodes[n].role != NodeRole::Terminal).collect();
        let parent = *inner.choose(rng).unwrap();
        let terminal = !pool.is_empty() && rng.gen_bool(0.4);
        let ty = TYPES[rng.gen_range(0..3)];
        let (id, role) = if terminal {
            (format!("E{}", pool.pop().unwrap()), NodeRole::Terminal)
        } else {
            (format!("v{i}"), NodeRole::Variable)
        };
        nodes.push(Node {
            id,
            role,
            entity_type: ty.into(),
            type_name: vec![ty.into()],
        });
        let child = nodes.len() - 1;
        let p = format!("p{}", rng.gen_range(0..preds));
        let (s, o) = if rng.gen_bool(0.5) { (parent, child) } else { (child, parent) };
        triples.push(triple(s, p, o, &nodes));
    }
    for _ in 0..extra {
        let inner: Vec<usize> = (0..nodes.len()).filter(|&n| nodes[n].role != NodeRole::Terminal).collect();
        let (&a, &b) = (inner.choose(rng).unwrap(), inner.choose(rng).unwrap());
        let p = format!("p{}", rng.gen_range(0..preds));
        triples.push(triple(a, p, b, &nodes));
    }
    QueryGraph { nodes, triples }
}

/// The same graph with nodes and triples reordered; the question node keeps
/// its role.
pub fn shuffled(g: &QueryGraph, rng: &mut impl Rng) -> QueryGraph {
    let mut node_perm: Vec<usize> = (0..g.nodes.len()).collect();
    node_perm.shuffle(rng);
    let mut inv = vec![0; node_perm.len()];
    for (new, &old) in node_perm.iter().enumerate() {
        inv[old] = new;
    }
    let nodes = node_perm.iter().map(|&o| g.nodes[o].clone()).collect();
    let mut triples: Vec<Triple> = g
        .triples
        .iter()
        .map(|t| {
            let mut t = t.clone();
            t.subject = inv[t.subject];
            t.object = inv[t.object];
            if let Some(gr) = &mut t.grounded {
                gr.node = inv[gr.node];
            }
            t
        })
        .collect();
    triples.shuffle(rng);
    QueryGraph { nodes, triples }
}
