//! Corpus construction: placeholder substitution, grouping, pools and splits.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kg::{find_pseudo_pool, isomorphism, QueryGraph};
use crate::text::{replace_entities, Token, TokenSequence};

/// One model example: a graph with every question written for it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub graph: QueryGraph,
    pub references: Vec<TokenSequence>,
    /// The sub-question paired one-to-one with this sample, placeholders unindexed.
    pub subquestion: Option<TokenSequence>,
    /// Indices into the simple-question corpus of pseudo sub-questions.
    pub pseudo_pool: Vec<usize>,
}

impl Sample {
    /// Checks that every reference placeholder names a grounded triple.
    pub fn check(&self) -> Result<()> {
        if self.references.is_empty() || self.references.iter().any(|r| r.is_empty()) {
            return Err(Error::Data("sample without references".into()));
        }
        let grounded = self.graph.grounded_triples();
        for r in &self.references {
            for t in r {
                if let Token::Placeholder(k) = t {
                    match k {
                        Some(k) if grounded.contains(k) => {}
                        _ => {
                            return Err(Error::Data(format!(
                                "placeholder {} does not name a grounded triple",
                                t.surface()
                            )))
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// An ungrouped question with placeholders already substituted.
#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub graph: QueryGraph,
    pub question: TokenSequence,
    pub subquestion: Option<TokenSequence>,
}

/// Entities to substitute for a graph: one `(triple index, name)` per
/// grounded node, using the first triple that grounds it.
pub fn graph_entities(g: &QueryGraph) -> Vec<(usize, &str)> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, t) in g.triples.iter().enumerate() {
        if let Some(gr) = &t.grounded {
            if seen.insert(gr.node) {
                out.push((i, gr.name.as_str()));
            }
        }
    }
    out
}

/// Tokenizes `question` and substitutes `g`'s entities. Returns the tokens
/// and the triple indices of entities not found in the text.
pub fn placeholderize(g: &QueryGraph, question: &str) -> (TokenSequence, Vec<usize>) {
    let r = replace_entities(question, &graph_entities(g));
    (r.tokens, r.unmatched)
}

/// Drops placeholder indices, as stored for sub-questions.
pub fn unindex(tokens: &[Token]) -> TokenSequence {
    tokens.iter().map(Token::unindexed).collect()
}

/// Merges items whose graphs are equivalent up to variable names and
/// entity identity. The first item of a group supplies its graph; later
/// items have their placeholder indices remapped onto it.
pub fn group_samples(items: &[Item]) -> Vec<Sample> {
    let mut out: Vec<Sample> = Vec::new();
    for item in items {
        let found = out
            .iter()
            .enumerate()
            .find_map(|(gi, s)| isomorphism(&item.graph, &s.graph).map(|perm| (gi, perm)));
        match found {
            Some((gi, perm)) => {
                let remapped = item
                    .question
                    .iter()
                    .map(|t| match t {
                        Token::Placeholder(Some(k)) if *k < perm.len() => {
                            Token::Placeholder(Some(perm[*k]))
                        }
                        t => t.clone(),
                    })
                    .collect();
                let s = &mut out[gi];
                s.references.push(remapped);
                if s.subquestion.is_none() {
                    s.subquestion = item.subquestion.clone();
                }
            }
            None => out.push(Sample {
                graph: item.graph.clone(),
                references: alloc::vec![item.question.clone()],
                subquestion: item.subquestion.clone(),
                pseudo_pool: Vec::new(),
            }),
        }
    }
    out
}

/// Fills every sample's pseudo pool from `simple`.
pub fn attach_pseudo_pools(samples: &mut [Sample], simple: &[Sample]) {
    for s in samples {
        s.pseudo_pool = find_pseudo_pool(&s.graph, simple.iter().map(|x| &x.graph));
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.7,
            dev: 0.15,
            test: 0.15,
            seed: 13,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let r = [self.train, self.dev, self.test];
        if r.iter().any(|&x| !(x > 0.0)) || ((r.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split ratios must be positive and sum to 1, got {r:?}"
            )));
        }
        Ok(())
    }
}

/// Index partition `(train, dev, test)` of `n` items: a seeded shuffle, then
/// `floor(n·train)` and `floor(n·dev)` items, the remainder going to test.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    if n < 3 {
        return Err(Error::Split(n));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    // The epsilon absorbs representation error such as 0.15 * 100 < 15.
    let n_train = libm::floor(n as f64 * spec.train + 1e-9) as usize;
    let n_dev = libm::floor(n as f64 * spec.dev + 1e-9) as usize;
    let test = idx.split_off(n_train + n_dev);
    let dev = idx.split_off(n_train);
    Ok((idx, dev, test))
}

pub fn split_dataset<T: Clone>(items: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let (a, b, c) = split_indices(items.len(), spec)?;
    let pick = |ix: Vec<usize>| ix.into_iter().map(|i| items[i].clone()).collect();
    Ok((pick(a), pick(b), pick(c)))
}

/// An unprocessed question paired with its graph.
#[derive(Debug, Clone, PartialEq)]
pub struct RawItem {
    pub graph: QueryGraph,
    pub question: String,
    /// Text and graph of the paired sub-question, if known.
    pub subquestion: Option<(QueryGraph, String)>,
}

/// Output of [`build_corpus`].
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub train: Vec<Sample>,
    pub dev: Vec<Sample>,
    pub test: Vec<Sample>,
    pub simple: Vec<Sample>,
    /// `(item index, triple index)` of entity names missing from a question.
    pub warnings: Vec<(usize, usize)>,
}

/// Substitutes entities, groups complex items, attaches pseudo pools from
/// the simple items and splits the groups.
pub fn build_corpus(complex: &[RawItem], simple: &[RawItem], spec: &SplitSpec) -> Result<Corpus> {
    let mut warnings = Vec::new();
    let mut items = Vec::with_capacity(complex.len());
    for (i, raw) in complex.iter().enumerate() {
        raw.graph.validate()?;
        let (question, unmatched) = placeholderize(&raw.graph, &raw.question);
        warnings.extend(unmatched.into_iter().map(|k| (i, k)));
        let subquestion = raw.subquestion.as_ref().map(|(g, q)| unindex(&placeholderize(g, q).0));
        items.push(Item {
            graph: raw.graph.clone(),
            question,
            subquestion,
        });
    }
    let mut simple_samples = Vec::with_capacity(simple.len());
    for (i, raw) in simple.iter().enumerate() {
        raw.graph.validate()?;
        let (question, unmatched) = placeholderize(&raw.graph, &raw.question);
        warnings.extend(unmatched.into_iter().map(|k| (complex.len() + i, k)));
        simple_samples.push(Sample {
            graph: raw.graph.clone(),
            references: alloc::vec![question],
            subquestion: None,
            pseudo_pool: Vec::new(),
        });
    }
    let mut samples = group_samples(&items);
    attach_pseudo_pools(&mut samples, &simple_samples);
    let (train, dev, test) = split_dataset(&samples, spec)?;
    Ok(Corpus {
        train,
        dev,
        test,
        simple: simple_samples,
        warnings,
    })
}
