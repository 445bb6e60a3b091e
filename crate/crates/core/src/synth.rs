//! Seeded template corpus of complex questions with sub-questions and
//! pseudo sub-questions, for exercising the pipeline without real data.
//!
//! Each predicate has a surface word that differs from its KB name, so the
//! wording of a question is learnt from data rather than read off the
//! graph, and several phrasings around that word. A complex question picks
//! one phrasing per triple; its sub-question repeats the phrasing of the
//! last chain triple, while pseudo sub-questions draw theirs independently.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kg::{isomorphism, Grounding, Node, NodeRole, QueryGraph, Triple};
use crate::preprocess::{attach_pseudo_pools, group_samples, placeholderize, unindex, Item, RawItem, Sample};

const TYPES: [&str; 6] = ["person", "film", "country", "company", "city", "book"];

const PREDICATE_NAMES: [&str; 24] = [
    "director", "employer", "founder", "capital", "birthplace", "spouse", "producer",
    "headquarters", "language", "currency", "leader", "genre", "author", "nationality",
    "mayor", "sibling", "owner", "composer", "star", "publisher", "editor", "sponsor",
    "mentor", "setting",
];

const SYLLABLES: [&str; 16] = [
    "al", "ver", "to", "ma", "ri", "sen", "ko", "dal", "ne", "bu", "ra", "lis", "mo", "than",
    "qui", "zo",
];

/// Number of phrasings per predicate.
pub const VARIANTS: usize = 3;

#[derive(Debug, Clone)]
struct Predicate {
    id: String,
    name: String,
    /// Word used for the predicate in questions.
    surface: String,
    subject_type: usize,
    object_type: usize,
}

fn phrase(name: &str, variant: usize) -> String {
    match variant {
        0 => format!("whose {name} is"),
        1 => format!("with {name}"),
        _ => format!("that has the {name}"),
    }
}

struct Generator {
    rng: ChaCha8Rng,
    preds: Vec<Predicate>,
    entities: Vec<Vec<String>>,
}

impl Generator {
    fn new(seed: u64, n_preds: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut preds = Vec::with_capacity(n_preds);
        let mut surfaces = alloc::collections::BTreeSet::new();
        for i in 0..n_preds {
            let name = match PREDICATE_NAMES.get(i) {
                Some(n) => n.to_string(),
                None => format!("{} {}", PREDICATE_NAMES[i % PREDICATE_NAMES.len()], i),
            };
            // Predicates cycle through subject types so every type has outgoing edges.
            let subject_type = i % TYPES.len();
            let object_type = rng.gen_range(0..TYPES.len());
            let surface = loop {
                let w: String = (0..3).map(|_| *SYLLABLES.choose(&mut rng).unwrap()).collect();
                if surfaces.insert(w.clone()) {
                    break w;
                }
            };
            preds.push(Predicate {
                id: format!("ns.{}", name.replace(' ', "_")),
                name,
                surface,
                subject_type,
                object_type,
            });
        }
        let mut entities = Vec::new();
        let mut used = alloc::collections::BTreeSet::new();
        for _ in TYPES {
            let mut names = Vec::new();
            while names.len() < 40 {
                let mut w = || {
                    let n = rng.gen_range(2..=3);
                    let mut s: String = (0..n).map(|_| *SYLLABLES.choose(&mut rng).unwrap()).collect();
                    s[..1].make_ascii_uppercase();
                    s
                };
                let full = format!("{} {}", w(), w());
                if used.insert(full.clone()) {
                    names.push(full);
                }
            }
            entities.push(names);
        }
        Generator {
            rng,
            preds,
            entities,
        }
    }

    fn node(id: String, role: NodeRole, ty: usize) -> Node {
        Node {
            id,
            role,
            entity_type: format!("type.{}", TYPES[ty]),
            type_name: vec![TYPES[ty].into()],
        }
    }

    fn triple(&self, p: usize, s: usize, o: usize, ground: Option<(usize, &str)>) -> Triple {
        let name: Vec<String> = self.preds[p].name.split(' ').map(String::from).collect();
        let mut inv = vec![String::from("is")];
        inv.extend(name.iter().cloned());
        inv.push("of".into());
        Triple {
            subject: s,
            predicate: self.preds[p].id.clone(),
            predicate_name: name,
            inverse_name: inv,
            object: o,
            grounded: ground.map(|(node, name)| Grounding {
                node,
                name: name.into(),
            }),
        }
    }

    fn entity(&mut self, ty: usize, avoid: &[String]) -> String {
        loop {
            let e = self.entities[ty].choose(&mut self.rng).unwrap().clone();
            if !avoid.contains(&e) {
                return e;
            }
        }
    }

    fn preds_from(&self, ty: usize) -> Vec<usize> {
        (0..self.preds.len()).filter(|&p| self.preds[p].subject_type == ty).collect()
    }

    /// One simple graph `(x, p, E)` and its question with the given phrasing.
    fn simple(&mut self, p: usize, entity: String, variant: usize) -> RawItem {
        let (st, ot) = (self.preds[p].subject_type, self.preds[p].object_type);
        let mut g = QueryGraph::default();
        g.nodes.push(Self::node("x".into(), NodeRole::Question, st));
        g.nodes.push(Self::node(entity.replace(' ', "_"), NodeRole::Terminal, ot));
        g.triples.push(self.triple(p, 0, 1, Some((1, &entity))));
        let question = format!(
            "which {} {} {} ?",
            TYPES[st],
            phrase(&self.preds[p].surface, variant),
            entity
        );
        RawItem {
            graph: g,
            question,
            subquestion: None,
        }
    }

    /// A chain `x -p1-> v1 -p2-> ... -> E` of 2 or 3 triples, optionally with a
    /// constraint `(x, p, E2)`. Returns the item, the last chain predicate,
    /// its phrasing, its terminal and the graph's predicates.
    fn complex(&mut self) -> Option<(RawItem, RawItem, Vec<usize>, Vec<String>)> {
        let start = self.rng.gen_range(0..TYPES.len());
        let chain_len = self.rng.gen_range(2..=3);
        let mut g = QueryGraph::default();
        g.nodes.push(Self::node("x".into(), NodeRole::Question, start));
        let mut chain = Vec::new();
        let mut ty = start;
        for _ in 0..chain_len {
            let options: Vec<usize> = self.preds_from(ty).into_iter().filter(|p| !chain.contains(p)).collect();
            let &p = options.choose(&mut self.rng)?;
            chain.push(p);
            ty = self.preds[p].object_type;
        }
        let variants: Vec<usize> = (0..chain.len() + 1).map(|_| self.rng.gen_range(0..VARIANTS)).collect();
        let mut terminals = Vec::new();
        let mut text = format!("which {}", TYPES[start]);
        let mut prev = 0;
        for (k, &p) in chain.iter().enumerate() {
            let ot = self.preds[p].object_type;
            text.push(' ');
            text.push_str(&phrase(&self.preds[p].surface, variants[k]));
            let node = g.nodes.len();
            if k + 1 == chain.len() {
                let e = self.entity(ot, &terminals);
                g.nodes.push(Self::node(e.replace(' ', "_"), NodeRole::Terminal, ot));
                let t = self.triple(p, prev, node, Some((node, &e)));
                g.triples.push(t);
                text.push(' ');
                text.push_str(&e);
                terminals.push(e);
            } else {
                g.nodes.push(Self::node(format!("v{k}"), NodeRole::Variable, ot));
                let t = self.triple(p, prev, node, None);
                g.triples.push(t);
                text.push_str(" the ");
                text.push_str(TYPES[ot]);
            }
            prev = node;
        }
        let mut preds = chain.clone();
        if chain_len == 2 && self.rng.gen_bool(0.5) {
            let options: Vec<usize> = self.preds_from(start).into_iter().filter(|p| !chain.contains(p)).collect();
            if let Some(&p) = options.choose(&mut self.rng) {
                let ot = self.preds[p].object_type;
                let e = self.entity(ot, &terminals);
                let node = g.nodes.len();
                g.nodes.push(Self::node(e.replace(' ', "_"), NodeRole::Terminal, ot));
                let t = self.triple(p, 0, node, Some((node, &e)));
                g.triples.push(t);
                text.push_str(" and ");
                text.push_str(&phrase(&self.preds[p].surface, variants[chain.len()]));
                text.push(' ');
                text.push_str(&e);
                terminals.push(e);
                preds.push(p);
            }
        }
        text.push_str(" ?");
        let last = *chain.last().unwrap();
        let sub = self.simple(last, terminals[0].clone(), variants[chain.len() - 1]);
        let item = RawItem {
            graph: g,
            question: text,
            subquestion: Some((sub.graph.clone(), sub.question.clone())),
        };
        Some((item, sub, preds, terminals))
    }
}

/// Raw output of the generator before grouping.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCorpus {
    pub complex: Vec<RawItem>,
    pub simple: Vec<RawItem>,
}

/// Generates `n_graphs` pairwise non-equivalent complex graphs. The simple
/// corpus holds, per complex graph, its true sub-question and
/// `pseudo_per_graph` pseudo sub-questions about other entities.
pub fn generate_raw(seed: u64, n_graphs: usize, n_predicates: usize, pseudo_per_graph: usize) -> Result<RawCorpus> {
    if n_graphs == 0 || n_predicates == 0 {
        return Err(Error::Config("synthetic corpus sizes must be positive".into()));
    }
    let mut gen = Generator::new(seed, n_predicates.max(2));
    let mut complex: Vec<RawItem> = Vec::new();
    let mut simple = Vec::new();
    let mut attempts = 0;
    while complex.len() < n_graphs {
        attempts += 1;
        if attempts > 200 * n_graphs + 1000 {
            return Err(Error::Config(format!(
                "could not generate {n_graphs} distinct graphs from {n_predicates} predicates"
            )));
        }
        let Some((item, sub, preds, terminals)) = gen.complex() else { continue };
        if complex.iter().any(|c| isomorphism(&c.graph, &item.graph).is_some()) {
            continue;
        }
        simple.push(sub);
        for _ in 0..pseudo_per_graph.max(1) {
            let p = *preds.choose(&mut gen.rng).unwrap();
            let e = gen.entity(gen.preds[p].object_type, &terminals);
            let v = gen.rng.gen_range(0..VARIANTS);
            simple.push(gen.simple(p, e, v));
        }
        complex.push(item);
    }
    Ok(RawCorpus { complex, simple })
}

/// Grouped complex samples (with pools) and the simple-question corpus.
pub fn generate_synthetic_corpus(
    seed: u64,
    n_graphs: usize,
    n_predicates: usize,
) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let raw = generate_raw(seed, n_graphs, n_predicates, 3)?;
    Ok(process(&raw))
}

/// Placeholder substitution, grouping and pool attachment without splitting.
pub fn process(raw: &RawCorpus) -> (Vec<Sample>, Vec<Sample>) {
    let items: Vec<Item> = raw
        .complex
        .iter()
        .map(|r| Item {
            graph: r.graph.clone(),
            question: placeholderize(&r.graph, &r.question).0,
            subquestion: r.subquestion.as_ref().map(|(g, q)| unindex(&placeholderize(g, q).0)),
        })
        .collect();
    let simple: Vec<Sample> = raw
        .simple
        .iter()
        .map(|r| Sample {
            graph: r.graph.clone(),
            references: vec![placeholderize(&r.graph, &r.question).0],
            subquestion: None,
            pseudo_pool: Vec::new(),
        })
        .collect();
    let mut samples = group_samples(&items);
    attach_pseudo_pools(&mut samples, &simple);
    (samples, simple)
}
