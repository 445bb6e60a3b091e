use alloc::vec;
use alloc::vec::Vec;

use super::{Node, NodeRole, QueryGraph, Triple};

/// Backtracking search for a node map `small → big` under which every
/// triple of `small` lands on a distinct triple of `big` with the same
/// predicate. Returns the triple assignment.
struct Embedder<'a, F> {
    small: &'a QueryGraph,
    small_triples: Vec<&'a Triple>,
    big: &'a QueryGraph,
    compat: F,
    node_map: Vec<Option<usize>>,
    node_used: Vec<usize>,
    triple_used: Vec<bool>,
    assignment: Vec<usize>,
}

impl<'a, F: Fn(&Node, &Node) -> bool> Embedder<'a, F> {
    fn new(small: &'a QueryGraph, small_triples: Vec<&'a Triple>, big: &'a QueryGraph, compat: F) -> Self {
        Embedder {
            small,
            small_triples,
            big,
            compat,
            node_map: vec![None; small.nodes.len()],
            node_used: vec![0; big.nodes.len()],
            triple_used: vec![false; big.triples.len()],
            assignment: Vec::new(),
        }
    }

    /// Maps `a → b`, returning whether a new binding was made, or `Err` on conflict.
    fn bind(&mut self, a: usize, b: usize) -> Result<bool, ()> {
        match self.node_map[a] {
            Some(x) if x == b => Ok(false),
            Some(_) => Err(()),
            None => {
                if self.node_used[b] > 0 || !(self.compat)(&self.small.nodes[a], &self.big.nodes[b]) {
                    return Err(());
                }
                self.node_map[a] = Some(b);
                self.node_used[b] += 1;
                Ok(true)
            }
        }
    }

    fn unbind(&mut self, a: usize) {
        if let Some(b) = self.node_map[a].take() {
            self.node_used[b] -= 1;
        }
    }

    fn search(&mut self, i: usize) -> bool {
        if i == self.small_triples.len() {
            return true;
        }
        let t = self.small_triples[i];
        for j in 0..self.big.triples.len() {
            let u = &self.big.triples[j];
            if self.triple_used[j] || u.predicate != t.predicate {
                continue;
            }
            let Ok(new_s) = self.bind(t.subject, u.subject) else { continue };
            let new_o = match self.bind(t.object, u.object) {
                Ok(b) => b,
                Err(()) => {
                    if new_s {
                        self.unbind(t.subject);
                    }
                    continue;
                }
            };
            self.triple_used[j] = true;
            self.assignment.push(j);
            if self.search(i + 1) {
                return true;
            }
            self.assignment.pop();
            self.triple_used[j] = false;
            if new_o {
                self.unbind(t.object);
            }
            if new_s {
                self.unbind(t.subject);
            }
        }
        false
    }
}

fn same_triple(a: &Triple, b: &Triple) -> bool {
    a.subject == b.subject && a.predicate == b.predicate && a.object == b.object
}

/// Triples with duplicate (subject, predicate, object) removed.
fn distinct_triples(g: &QueryGraph) -> Vec<&Triple> {
    let mut out: Vec<&Triple> = Vec::new();
    for t in &g.triples {
        if !out.iter().any(|u| same_triple(u, t)) {
            out.push(t);
        }
    }
    out
}

fn renaming_compat(a: &Node, b: &Node) -> bool {
    match (a.role == NodeRole::Terminal, b.role == NodeRole::Terminal) {
        (true, true) => a.id == b.id,
        (false, false) => true,
        _ => false,
    }
}

/// Whether `sub`'s triples are a strict subset of `g`'s up to an injective
/// renaming of non-terminal nodes. Terminals must be the same entity.
pub fn is_subquestion(sub: &QueryGraph, g: &QueryGraph) -> bool {
    let st = distinct_triples(sub);
    if st.len() >= distinct_triples(g).len() {
        return false;
    }
    Embedder::new(sub, st, g, renaming_compat).search(0)
}

/// Not a sub-question, but every predicate of `sub` occurs in `g`.
pub fn is_pseudo_subquestion(sub: &QueryGraph, g: &QueryGraph) -> bool {
    !is_subquestion(sub, g) && sub.predicates().is_subset(&g.predicates())
}

/// Indices of corpus graphs that are pseudo sub-questions of `g`, in corpus order.
pub fn find_pseudo_pool<'a, I>(g: &QueryGraph, corpus: I) -> Vec<usize>
where
    I: IntoIterator<Item = &'a QueryGraph>,
{
    corpus
        .into_iter()
        .enumerate()
        .filter(|(_, c)| is_pseudo_subquestion(c, g))
        .map(|(i, _)| i)
        .collect()
}

/// Structural equivalence used for grouping: a bijection between nodes that
/// keeps roles and entity types, ignores terminal identity, and maps triples
/// one-to-one with equal predicates. Returns `perm` with `a.triples[i]`
/// corresponding to `b.triples[perm[i]]`.
pub fn isomorphism(a: &QueryGraph, b: &QueryGraph) -> Option<Vec<usize>> {
    if a.nodes.len() != b.nodes.len() || a.triples.len() != b.triples.len() {
        return None;
    }
    let compat = |x: &Node, y: &Node| x.role == y.role && x.entity_type == y.entity_type;
    let mut e = Embedder::new(a, a.triples.iter().collect(), b, compat);
    if e.search(0) {
        Some(e.assignment)
    } else {
        None
    }
}
