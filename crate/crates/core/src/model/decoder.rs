use alloc::vec;
use alloc::vec::Vec;

use super::subq::{aggregate, SubqContext};
use super::{Input, Model, Variant};
use crate::error::{Error, Result};
use crate::tensor::{Graph, Tensor, Var};
use crate::text::Token;
use crate::vocab::{BOS, EOS, PH};

/// Everything computed once per example before decoding.
#[derive(Debug, Clone)]
pub struct Context {
    /// Relation encoding per triple.
    pub relations: Vec<Var>,
    /// `[N, relation_dim]` matrix of `relations`.
    pub relation_matrix: Var,
    /// Attention key projection per triple.
    pub keys: Vec<Var>,
    /// Triple indices carrying a grounded entity; output slot `V + k` is
    /// the placeholder of `grounded[k]`.
    pub grounded: Vec<usize>,
    pub grounded_mask: Vec<bool>,
    pub root_h: Var,
    pub root_c: Var,
    pub subquestions: Vec<SubqContext>,
    /// Question weights `a_m` (multi-question variant).
    pub question_weights: Option<Var>,
    /// Word weights `a_jm` per question (multi-question variant).
    pub word_weights: Vec<Var>,
    pub vocab_size: usize,
    output_mask: Vec<bool>,
}

impl Context {
    /// Length of every output distribution.
    pub fn output_size(&self) -> usize {
        self.vocab_size + self.grounded.len()
    }

    /// Output id of a target token; words outside the vocabulary map to UNK.
    pub fn target_id(&self, model: &Model, tok: &Token) -> Result<usize> {
        match tok {
            Token::Word(w) => Ok(model.tables.words.id(w)),
            Token::Placeholder(Some(k)) => self
                .grounded
                .iter()
                .position(|g| g == k)
                .map(|p| self.vocab_size + p)
                .ok_or_else(|| Error::Data(alloc::format!("placeholder PH{k} is not grounded"))),
            Token::Placeholder(None) => Err(Error::Data("unindexed placeholder in a target".into())),
        }
    }

    /// Token for an output id; `None` for EOS.
    pub fn token(&self, model: &Model, id: usize) -> Option<Token> {
        if id == EOS {
            None
        } else if id >= self.vocab_size {
            Some(Token::Placeholder(Some(self.grounded[id - self.vocab_size])))
        } else {
            Some(Token::Word(model.tables.words.symbol(id).into()))
        }
    }

    /// Embedding id fed back after emitting output `id`.
    pub fn feedback_id(&self, id: usize) -> usize {
        if id >= self.vocab_size {
            PH
        } else {
            id
        }
    }
}

/// Decoder state between steps.
#[derive(Debug, Clone, Copy)]
pub struct State {
    pub h: Var,
    pub c: Var,
    /// Accumulated attention per relation; absent when attention is ablated.
    pub coverage: Option<Var>,
    pub t: usize,
    /// Embedding id of the previous token.
    pub prev: usize,
}

/// Per sub-question quantities of one step.
#[derive(Debug, Clone, Copy)]
pub struct SubqHead {
    pub attention: Var,
    pub context: Var,
    pub p_copy: Var,
    pub p_ph: Var,
    /// Generation distribution before copying.
    pub generate: Var,
    /// Vocabulary distribution after copying.
    pub vocab: Var,
    /// Full distribution for this sub-question.
    pub dist: Var,
}

/// Result of one decoder step.
#[derive(Debug, Clone)]
pub struct StepOut {
    /// Distribution over `[vocabulary | grounded placeholders]`.
    pub dist: Var,
    /// Relation attention `a_t`.
    pub attention: Option<Var>,
    /// Coverage before this step, `c_t`.
    pub coverage: Option<Var>,
    /// Placeholder attention `α'` over all relations (zero where ungrounded).
    pub placeholder_attention: Option<Var>,
    /// Base-model vocabulary distribution and placeholder switch.
    pub vocab: Option<Var>,
    pub p_ph: Option<Var>,
    pub heads: Vec<SubqHead>,
}

impl Model {
    /// Encodes the graph and any sub-questions.
    pub fn prepare(&self, g: &mut Graph<'_>, input: &Input<'_>) -> Result<Context> {
        let (relations, root_h, root_c) = self.encode_graph(g, input.graph)?;
        let relation_matrix = g.stack(&relations)?;
        let scorer = self.params.attn.or(self.params.ph_attn).expect("one relation scorer exists");
        let keys = relations
            .iter()
            .map(|&r| scorer.project_key(g, r))
            .collect::<Result<Vec<_>>>()?;
        let grounded = input.graph.grounded_triples();
        let mut grounded_mask = vec![false; relations.len()];
        for &k in &grounded {
            grounded_mask[k] = true;
        }
        let need = match self.config.variant {
            Variant::Cogsub2q => Some(1),
            Variant::Cogsubm2q => None,
            _ => Some(0),
        };
        if self.config.variant.uses_subquestions() && input.subquestions.is_empty() {
            return Err(Error::EmptyPool("this variant needs a sub-question".into()));
        }
        if let Some(n) = need {
            if n > 0 && input.subquestions.len() != n {
                return Err(Error::Config(alloc::format!(
                    "expected {n} sub-question, got {}",
                    input.subquestions.len()
                )));
            }
        }
        let subquestions = if self.config.variant.uses_subquestions() {
            input
                .subquestions
                .iter()
                .map(|q| self.encode_subquestion(g, q))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let (question_weights, word_weights) = if self.config.variant == Variant::Cogsubm2q {
            let (a, w) = self.score_questions(g, &subquestions, root_h)?;
            (Some(a), w)
        } else {
            (None, Vec::new())
        };
        Ok(Context {
            relations,
            relation_matrix,
            keys,
            grounded,
            grounded_mask,
            root_h,
            root_c,
            subquestions,
            question_weights,
            word_weights,
            vocab_size: self.vocab_size(),
            output_mask: self.tables.output_mask(),
        })
    }

    /// Decoder state copied from the encoder root, zero coverage, BOS input.
    pub fn init_state(&self, g: &mut Graph<'_>, ctx: &Context) -> State {
        let coverage = self
            .params
            .attn
            .map(|_| g.constant(Tensor::zeros(&[ctx.relations.len()])));
        State {
            h: ctx.root_h,
            c: ctx.root_c,
            coverage,
            t: 0,
            prev: BOS,
        }
    }

    /// Advances the decoder by one token and returns the output distribution.
    /// The new state still has `prev` unset; use [`State::feed`].
    pub fn step(&self, g: &mut Graph<'_>, ctx: &Context, st: &State) -> Result<(State, StepOut)> {
        let p = &self.params;
        let table = g.param(p.word);
        let x = g.embedding(table, st.prev)?;
        let (h, c) = p.dec.step(g, x, st.h, st.c)?;

        let (attention, r_star, alpha_logits, coverage_next) = match p.attn {
            Some(attn) => {
                let logits = attn.logits(g, h, &ctx.keys, st.coverage)?;
                let a = g.softmax(logits)?;
                let r = g.matmul(a, ctx.relation_matrix)?;
                let cov = st.coverage.expect("coverage tracked with attention");
                let next = g.add(cov, a)?;
                (Some(a), r, logits, Some(next))
            }
            None => {
                let scorer = p.ph_attn.expect("placeholder scorer without attention");
                let logits = scorer.logits(g, h, &ctx.keys, None)?;
                let r = g.constant(Tensor::zeros(&[self.config.relation_dim]));
                (None, r, logits, None)
            }
        };
        let grounded = !ctx.grounded.is_empty();
        let alpha = if grounded {
            Some(g.masked_softmax(alpha_logits, &ctx.grounded_mask)?)
        } else {
            None
        };
        let alpha_g = match alpha {
            Some(a) => Some(g.gather(a, &ctx.grounded)?),
            None => None,
        };

        let mut out = StepOut {
            dist: r_star,
            attention,
            coverage: st.coverage,
            placeholder_attention: alpha,
            vocab: None,
            p_ph: None,
            heads: Vec::new(),
        };
        let mix = |g: &mut Graph<'_>, vocab: Var, p_ph: Var| -> Result<Var> {
            match alpha_g {
                Some(ag) => {
                    let keep = g.one_minus(p_ph);
                    let v = g.scalar_mul(keep, vocab)?;
                    let ph = g.scalar_mul(p_ph, ag)?;
                    g.concat(&[v, ph])
                }
                None => Ok(vocab),
            }
        };

        if let Some(sp) = p.subq {
            let mut dists = Vec::with_capacity(ctx.subquestions.len());
            for sq in &ctx.subquestions {
                let (a_q, hq) = self.attend_subquestion(g, h, sq)?;
                let xhq = g.concat(&[x, h, hq])?;
                let pc = sp.copy.apply(g, xhq)?;
                let p_copy = g.sigmoid(pc);
                let hrq = g.concat(&[h, r_star, hq])?;
                let lv = sp.vocab.apply(g, hrq)?;
                let generate = g.masked_softmax(lv, &ctx.output_mask)?;
                let copied = g.scatter_add(a_q, &sq.copy_targets, ctx.vocab_size)?;
                let keep = g.one_minus(p_copy);
                let gen_part = g.scalar_mul(keep, generate)?;
                let copy_part = g.scalar_mul(p_copy, copied)?;
                let vocab = g.add(gen_part, copy_part)?;
                let p_ph = if grounded {
                    let xhrq = g.concat(&[x, h, r_star, hq])?;
                    let l = sp.ph.apply(g, xhrq)?;
                    g.sigmoid(l)
                } else {
                    g.scalar(0.0)
                };
                let dist = mix(g, vocab, p_ph)?;
                dists.push(dist);
                out.heads.push(SubqHead {
                    attention: a_q,
                    context: hq,
                    p_copy,
                    p_ph,
                    generate,
                    vocab,
                    dist,
                });
            }
            out.dist = match ctx.question_weights {
                Some(a_m) => aggregate(g, &dists, a_m)?,
                None => dists[0],
            };
        } else {
            let (wv, wp) = (p.vocab.unwrap(), p.ph.unwrap());
            let hr = g.concat(&[h, r_star])?;
            let lv = wv.apply(g, hr)?;
            let vocab = g.masked_softmax(lv, &ctx.output_mask)?;
            let p_ph = if grounded {
                let xhr = g.concat(&[x, h, r_star])?;
                let l = wp.apply(g, xhr)?;
                g.sigmoid(l)
            } else {
                g.scalar(0.0)
            };
            out.dist = mix(g, vocab, p_ph)?;
            out.vocab = Some(vocab);
            out.p_ph = Some(p_ph);
        }
        let next = State {
            h,
            c,
            coverage: coverage_next,
            t: st.t + 1,
            prev: st.prev,
        };
        Ok((next, out))
    }
}

impl State {
    /// The state with `id` (an output id) as the next input token.
    pub fn feed(mut self, ctx: &Context, id: usize) -> Self {
        self.prev = ctx.feedback_id(id);
        self
    }
}
