//! Independent brute-force oracles for metrics and matchers.

use std::collections::BTreeSet;

use cqg_core::kg::{NodeRole, QueryGraph};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Seq = Vec<u8>;

pub fn occurrences(seq: &[u8], gram: &[u8]) -> usize {
    if gram.len() > seq.len() {
        return 0;
    }
    (0..=seq.len() - gram.len()).filter(|&i| &seq[i..i + gram.len()] == gram).count()
}

/// Textbook corpus BLEU written position by position.
pub fn oracle_bleu(cands: &[Seq], refs: &[Vec<Seq>], max_n: usize) -> Vec<f64> {
    let mut p = Vec::new();
    for n in 1..=max_n {
        let (mut num, mut den) = (0.0, 0.0);
        for (c, rs) in cands.iter().zip(refs) {
            if c.len() < n {
                continue;
            }
            let mut seen: Vec<&[u8]> = Vec::new();
            for i in 0..=c.len() - n {
                let gram = &c[i..i + n];
                den += 1.0;
                if seen.contains(&gram) {
                    continue;
                }
                seen.push(gram);
                let mine = occurrences(c, gram);
                let theirs = rs.iter().map(|r| occurrences(r, gram)).max().unwrap();
                num += mine.min(theirs) as f64;
            }
        }
        p.push(if den == 0.0 { 0.0 } else { num / den });
    }
    let c: usize = cands.iter().map(|c| c.len()).sum();
    let mut r = 0;
    for (cand, rs) in cands.iter().zip(refs) {
        let mut best = rs[0].len();
        for x in rs {
            let (d, bd) = ((x.len() as i64 - cand.len() as i64).abs(), (best as i64 - cand.len() as i64).abs());
            if d < bd || (d == bd && x.len() < best) {
                best = x.len();
            }
        }
        r += best;
    }
    let bp = if c == 0 {
        0.0
    } else if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    (1..=max_n)
        .map(|n| {
            let prod: f64 = p[..n].iter().product();
            bp * prod.powf(1.0 / n as f64)
        })
        .collect()
}

pub fn is_subsequence(s: &[u8], of: &[u8]) -> bool {
    let mut it = of.iter();
    s.iter().all(|x| it.any(|y| y == x))
}

/// LCS by trying every subsequence of `a`.
pub fn exhaustive_lcs(a: &[u8], b: &[u8]) -> usize {
    (0u32..1 << a.len())
        .filter_map(|mask| {
            let s: Vec<u8> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| a[i]).collect();
            is_subsequence(&s, b).then_some(s.len())
        })
        .max()
        .unwrap_or(0)
}

pub fn oracle_rouge(cands: &[Seq], refs: &[Vec<Seq>], beta: f64) -> f64 {
    let mut total = 0.0;
    for (c, rs) in cands.iter().zip(refs) {
        let mut best: f64 = 0.0;
        for r in rs {
            let l = exhaustive_lcs(c, r) as f64;
            if l > 0.0 {
                let (rec, prec) = (l / r.len() as f64, l / c.len() as f64);
                best = best.max((1.0 + beta * beta) * rec * prec / (rec + beta * beta * prec));
            }
        }
        total += best;
    }
    total / cands.len() as f64
}

pub fn random_seq(rng: &mut ChaCha8Rng, alphabet: u8, max: usize) -> Seq {
    (0..rng.gen_range(0..=max)).map(|_| rng.gen_range(0..alphabet)).collect()
}

pub fn random_corpus(rng: &mut ChaCha8Rng) -> (Vec<Seq>, Vec<Vec<Seq>>) {
    let n = rng.gen_range(1..6);
    let alphabet = rng.gen_range(2..6);
    let cands = (0..n).map(|_| random_seq(rng, alphabet, 8)).collect();
    let refs = (0..n)
        .map(|_| {
            (0..rng.gen_range(1..4))
                .map(|_| {
                    let mut r = random_seq(rng, alphabet, 8);
                    if r.is_empty() {
                        r.push(0);
                    }
                    r
                })
                .collect()
        })
        .collect();
    (cands, refs)
}

pub type Fact = (usize, String, usize);

pub fn facts(g: &QueryGraph) -> BTreeSet<Fact> {
    g.triples.iter().map(|t| (t.subject, t.predicate.clone(), t.object)).collect()
}

/// Tries every function from `sub`'s nodes to `g`'s nodes.
pub fn exhaustive_subquestion(sub: &QueryGraph, g: &QueryGraph) -> bool {
    let (fs, fg) = (facts(sub), facts(g));
    if fs.len() >= fg.len() {
        return false;
    }
    let n = sub.nodes.len();
    let mut map = vec![0usize; n];
    let total = g.nodes.len().pow(n as u32);
    'maps: for code in 0..total {
        let mut c = code;
        for slot in map.iter_mut() {
            *slot = c % g.nodes.len();
            c /= g.nodes.len();
        }
        for a in 0..n {
            let (x, y) = (&sub.nodes[a], &g.nodes[map[a]]);
            let ok = match (x.role == NodeRole::Terminal, y.role == NodeRole::Terminal) {
                (true, true) => x.id == y.id,
                (false, false) => true,
                _ => false,
            };
            if !ok || (0..a).any(|b| map[b] == map[a]) {
                continue 'maps;
            }
        }
        if fs.iter().all(|(s, p, o)| fg.contains(&(map[*s], p.clone(), map[*o]))) {
            return true;
        }
    }
    false
}

pub fn exhaustive_pseudo(sub: &QueryGraph, g: &QueryGraph) -> bool {
    let ps: BTreeSet<&str> = sub.triples.iter().map(|t| t.predicate.as_str()).collect();
    let pg: BTreeSet<&str> = g.triples.iter().map(|t| t.predicate.as_str()).collect();
    !exhaustive_subquestion(sub, g) && ps.is_subset(&pg)
}

/// A graph over a subset of `g`'s triples with nodes reordered and
/// occasionally an entity or predicate swapped.
pub fn derived(g: &QueryGraph, rng: &mut ChaCha8Rng) -> QueryGraph {
    let mut picked: Vec<usize> = (0..g.triples.len()).collect();
    picked.shuffle(rng);
    picked.truncate(rng.gen_range(1..=g.triples.len()));
    let mut used: Vec<usize> = picked
        .iter()
        .flat_map(|&t| [g.triples[t].subject, g.triples[t].object])
        .collect();
    used.sort();
    used.dedup();
    used.shuffle(rng);
    let mut nodes: Vec<_> = used.iter().map(|&n| g.nodes[n].clone()).collect();
    for n in nodes.iter_mut() {
        if n.role == NodeRole::Terminal && rng.gen_bool(0.2) {
            n.id = format!("E{}", rng.gen_range(0..4));
        } else if n.role != NodeRole::Terminal {
            n.id = format!("r{}", rng.gen::<u16>());
        }
    }
    let at = |x: usize| used.iter().position(|&u| u == x).unwrap();
    let triples = picked
        .iter()
        .map(|&t| {
            let mut t = g.triples[t].clone();
            t.subject = at(t.subject);
            t.object = at(t.object);
            if rng.gen_bool(0.1) {
                t.predicate = format!("p{}", rng.gen_range(0..3));
            }
            t.grounded = None;
            t
        })
        .collect();
    QueryGraph { nodes, triples }
}

