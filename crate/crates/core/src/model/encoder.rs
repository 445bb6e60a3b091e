use alloc::vec::Vec;

use super::{Lstm, Model, Variant};
use crate::error::{Error, Result};
use crate::kg::{EncodingTree, QueryGraph};
use crate::tensor::{Graph, Tensor, Var};
use crate::vocab::{inverse, DELIM};

/// Embedding ids and the name token sequence describing one triple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationFeatures {
    pub t_s: usize,
    pub v_s: usize,
    pub t_p: usize,
    pub t_pinv: usize,
    pub t_o: usize,
    pub v_o: usize,
    /// Subject type name, predicate name, inverse name and object type name
    /// joined by the delimiter; the inverse name is left out when the inverse
    /// predicate is ablated.
    pub names: Vec<usize>,
}

impl Model {
    pub fn relation_features(&self, g: &QueryGraph, triple: usize) -> RelationFeatures {
        let t = &g.triples[triple];
        let (s, o) = (&g.nodes[t.subject], &g.nodes[t.object]);
        let w = &self.tables.words;
        let mut names = Vec::new();
        names.extend(s.type_name.iter().map(|x| w.id(x)));
        names.push(DELIM);
        names.extend(t.predicate_name.iter().map(|x| w.id(x)));
        if !self.config.ablation.no_inverse_predicate {
            names.push(DELIM);
            names.extend(t.inverse_name.iter().map(|x| w.id(x)));
        }
        names.push(DELIM);
        names.extend(o.type_name.iter().map(|x| w.id(x)));
        RelationFeatures {
            t_s: self.tables.entity_types.id(&s.entity_type),
            v_s: s.role.index(),
            t_p: self.tables.predicates.id(&t.predicate),
            t_pinv: self.tables.predicates.id(&inverse(&t.predicate)),
            t_o: self.tables.entity_types.id(&o.entity_type),
            v_o: o.role.index(),
            names,
        }
    }

    /// Final hidden state of an LSTM run from zero state over embedded tokens.
    pub(crate) fn run_lstm(&self, g: &mut Graph<'_>, lstm: &Lstm, ids: &[usize]) -> Result<Vec<Var>> {
        let table = g.param(self.params.word);
        let mut h = g.constant(Tensor::zeros(&[lstm.hidden]));
        let mut c = h;
        let mut states = Vec::with_capacity(ids.len());
        for &id in ids {
            let x = g.embedding(table, id)?;
            (h, c) = lstm.step(g, x, h, c)?;
            states.push(h);
        }
        Ok(states)
    }

    /// `e = tanh(W [t_s, v_s, t_p, t_^p, t_o, v_o, h_L] + b)`.
    pub fn encode_relation(&self, g: &mut Graph<'_>, f: &RelationFeatures) -> Result<Var> {
        let p = &self.params;
        let (types, roles, preds) = (g.param(p.entity_type), g.param(p.role), g.param(p.predicate));
        let mut parts = Vec::with_capacity(7);
        parts.push(g.embedding(types, f.t_s)?);
        parts.push(g.embedding(roles, f.v_s)?);
        parts.push(g.embedding(preds, f.t_p)?);
        if !self.config.ablation.no_inverse_predicate {
            parts.push(g.embedding(preds, f.t_pinv)?);
        }
        parts.push(g.embedding(types, f.t_o)?);
        parts.push(g.embedding(roles, f.v_o)?);
        if let Some(lstm) = &p.name {
            let states = self.run_lstm(g, lstm, &f.names)?;
            parts.push(*states.last().ok_or_else(|| Error::Data("empty name sequence".into()))?);
        }
        let x = g.concat(&parts)?;
        let y = p.relation.apply(g, x)?;
        Ok(g.tanh(y))
    }

    /// Child-sum cell: gates read `[e, Σ h_k]` and `c = i⊙u + f⊙Σ c_k`.
    pub fn tree_cell(&self, g: &mut Graph<'_>, e: Var, children: &[(Var, Var)]) -> Result<(Var, Var)> {
        let (cell, _) = self.params.tree.as_ref().ok_or_else(|| {
            Error::Config("this variant has no tree encoder".into())
        })?;
        let d = cell.hidden;
        let (h_sum, c_sum) = if children.is_empty() {
            let z = g.constant(Tensor::zeros(&[d]));
            (z, z)
        } else {
            let hs: Vec<Var> = children.iter().map(|c| c.0).collect();
            let cs: Vec<Var> = children.iter().map(|c| c.1).collect();
            for &v in hs.iter().chain(&cs) {
                if g.shape(v) != [d] {
                    return Err(Error::Shape(alloc::format!(
                        "child state of shape {:?}, expected [{d}]",
                        g.shape(v)
                    )));
                }
            }
            (g.sum(&hs)?, g.sum(&cs)?)
        };
        cell.step(g, e, h_sum, c_sum)
    }

    /// Post-order Tree-LSTM over `tree`; returns the state of every tree node.
    pub fn encode_tree(&self, g: &mut Graph<'_>, tree: &EncodingTree, rels: &[Var]) -> Result<Vec<(Var, Var)>> {
        let (_, dummy) = self.params.tree.ok_or_else(|| Error::Config("this variant has no tree encoder".into()))?;
        let mut states: Vec<Option<(Var, Var)>> = alloc::vec![None; tree.len()];
        for i in tree.post_order() {
            let node = &tree.nodes[i];
            let e = match node.via {
                Some(t) => rels[t],
                None => g.param(dummy),
            };
            let children: Vec<(Var, Var)> = node.children.iter().map(|&c| states[c].unwrap()).collect();
            states[i] = Some(self.tree_cell(g, e, &children)?);
        }
        Ok(states.into_iter().map(Option::unwrap).collect())
    }

    /// Relation encodings of every triple and the decoder's initial `(h, c)`.
    pub(crate) fn encode_graph(&self, g: &mut Graph<'_>, qg: &QueryGraph) -> Result<(Vec<Var>, Var, Var)> {
        if qg.triples.is_empty() {
            return Err(Error::Data("graph has no triples".into()));
        }
        let mut rels = Vec::with_capacity(qg.triples.len());
        for i in 0..qg.triples.len() {
            let f = self.relation_features(qg, i);
            rels.push(self.encode_relation(g, &f)?);
        }
        if self.config.variant == Variant::EncDec {
            let s = g.sum(&rels)?;
            let mean = g.scale(s, 1.0 / rels.len() as f64);
            return Ok((rels, mean, mean));
        }
        let tree = EncodingTree::build(qg);
        let states = self.encode_tree(g, &tree, &rels)?;
        let (h, c) = states[tree.root()];
        Ok((rels, h, c))
    }
}
