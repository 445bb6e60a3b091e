use alloc::vec::Vec;

use super::Model;
use crate::error::{Error, Result};
use crate::tensor::{Graph, Var};
use crate::text::Token;

/// An encoded sub-question.
#[derive(Debug, Clone)]
pub struct SubqContext {
    /// Hidden state per token.
    pub states: Vec<Var>,
    /// `[N, subq_dim]` matrix of `states`.
    pub matrix: Var,
    /// True where the token may be attended to (not a placeholder).
    pub mask: Vec<bool>,
    /// Vocabulary id each token copies into; `None` for placeholders.
    pub copy_targets: Vec<Option<usize>>,
    /// Attention key projection per token.
    pub keys: Vec<Var>,
}

impl Model {
    pub fn encode_subquestion(&self, g: &mut Graph<'_>, tokens: &[Token]) -> Result<SubqContext> {
        let sp = self
            .params
            .subq
            .ok_or_else(|| Error::Config("this variant takes no sub-question".into()))?;
        if tokens.is_empty() {
            return Err(Error::Data("empty sub-question".into()));
        }
        let mask: Vec<bool> = tokens.iter().map(|t| !t.is_placeholder()).collect();
        if !mask.contains(&true) {
            return Err(Error::Mask);
        }
        let ids: Vec<usize> = tokens.iter().map(|t| self.tables.input_id(t)).collect();
        let states = self.run_lstm(g, &sp.lstm, &ids)?;
        let matrix = g.stack(&states)?;
        let keys = states
            .iter()
            .map(|&h| sp.attn.project_key(g, h))
            .collect::<Result<Vec<_>>>()?;
        let copy_targets = tokens
            .iter()
            .map(|t| match t {
                Token::Word(w) => Some(self.tables.words.id(w)),
                Token::Placeholder(_) => None,
            })
            .collect();
        Ok(SubqContext {
            states,
            matrix,
            mask,
            copy_targets,
            keys,
        })
    }

    /// Word weights over attendable tokens and their weighted state sum.
    pub fn attend_subquestion(&self, g: &mut Graph<'_>, h: Var, sq: &SubqContext) -> Result<(Var, Var)> {
        let sp = self
            .params
            .subq
            .ok_or_else(|| Error::Config("this variant takes no sub-question".into()))?;
        let logits = sp.attn.logits(g, h, &sq.keys, None)?;
        let a = g.masked_softmax(logits, &sq.mask)?;
        let ctx = g.matmul(a, sq.matrix)?;
        Ok((a, ctx))
    }

    /// Two-level scores: per-question word weights `a_jm` from
    /// `W8 [h_j, h_root]` and question weights `a_m` from `W9 [h_m*, h_root]`.
    pub fn score_questions(&self, g: &mut Graph<'_>, subqs: &[SubqContext], root_h: Var) -> Result<(Var, Vec<Var>)> {
        let (w8, w9) = self
            .params
            .score
            .ok_or_else(|| Error::Config("this variant does not score questions".into()))?;
        if subqs.is_empty() {
            return Err(Error::EmptyPool("no pseudo sub-questions to score".into()));
        }
        let (w8, w9) = (g.param(w8), g.param(w9));
        let mut word_weights = Vec::with_capacity(subqs.len());
        let mut q_logits = Vec::with_capacity(subqs.len());
        for sq in subqs {
            let mut logits = Vec::with_capacity(sq.states.len());
            for &h in &sq.states {
                let x = g.concat(&[h, root_h])?;
                logits.push(g.matmul(w8, x)?);
            }
            let l = g.concat(&logits)?;
            let a = g.masked_softmax(l, &sq.mask)?;
            let summary = g.matmul(a, sq.matrix)?;
            let x = g.concat(&[summary, root_h])?;
            q_logits.push(g.matmul(w9, x)?);
            word_weights.push(a);
        }
        let l = g.concat(&q_logits)?;
        let a_m = g.softmax(l)?;
        Ok((a_m, word_weights))
    }
}

/// `Σ_m a_m P_m` over distributions of equal length.
pub fn aggregate(g: &mut Graph<'_>, dists: &[Var], a_m: Var) -> Result<Var> {
    let Some(&first) = dists.first() else {
        return Err(Error::EmptyPool("nothing to aggregate".into()));
    };
    if dists.iter().any(|&d| g.shape(d) != g.shape(first)) || g.shape(a_m) != [dists.len()] {
        return Err(Error::Support(alloc::format!(
            "{} distributions, weights of shape {:?}",
            dists.len(),
            g.shape(a_m)
        )));
    }
    let stacked = g.stack(dists)?;
    g.matmul(a_m, stacked)
}
