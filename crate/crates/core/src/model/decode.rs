use alloc::vec::Vec;

use super::{Input, Model, State};
use crate::error::{Error, Result};
use crate::math;
use crate::tensor::Graph;
use crate::text::TokenSequence;
use crate::vocab::EOS;

/// A decoded question.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    /// Tokens without the final EOS.
    pub tokens: TokenSequence,
    /// Output ids including EOS when it was produced.
    pub ids: Vec<usize>,
    /// Sum of log-probabilities of `ids`.
    pub log_prob: f64,
    /// Question weights of the multi-question variant.
    pub question_weights: Option<Vec<f64>>,
}

impl Decoded {
    /// Log-probability divided by the number of emitted ids.
    pub fn normalized_score(&self) -> f64 {
        if self.ids.is_empty() {
            0.0
        } else {
            self.log_prob / self.ids.len() as f64
        }
    }
}

fn finish(model: &Model, ctx: &super::Context, ids: Vec<usize>, log_prob: f64, qw: Option<Vec<f64>>) -> Decoded {
    let tokens = ids.iter().filter_map(|&i| ctx.token(model, i)).collect();
    Decoded {
        tokens,
        ids,
        log_prob,
        question_weights: qw,
    }
}

/// Picks the most probable output at each step (lowest id on ties) until
/// EOS or `max_len` steps.
pub fn greedy(model: &Model, input: &Input<'_>, max_len: usize) -> Result<Decoded> {
    if max_len == 0 {
        return Err(Error::Config("max_len must be at least 1".into()));
    }
    let mut g = Graph::new(&model.store);
    let ctx = model.prepare(&mut g, input)?;
    let qw = ctx.question_weights.map(|a| g.value(a).data().to_vec());
    let mut st = model.init_state(&mut g, &ctx);
    let mut ids = Vec::new();
    let mut lp = 0.0;
    for _ in 0..max_len {
        let (next, out) = model.step(&mut g, &ctx, &st)?;
        let p = g.value(out.dist).data();
        let mut best = 0;
        for (i, &v) in p.iter().enumerate() {
            if v > p[best] {
                best = i;
            }
        }
        lp += math::ln(p[best]);
        ids.push(best);
        if best == EOS {
            break;
        }
        st = next.feed(&ctx, best);
    }
    Ok(finish(model, &ctx, ids, lp, qw))
}

struct Hyp {
    state: State,
    ids: Vec<usize>,
    log_prob: f64,
}

/// Beam search keeping the `width` best partial sequences by total
/// log-probability; among finished sequences (EOS or `max_len` reached) the
/// one with the highest log-probability per emitted id wins.
pub fn beam(model: &Model, input: &Input<'_>, max_len: usize, width: usize) -> Result<Decoded> {
    if max_len == 0 || width == 0 {
        return Err(Error::Config("max_len and beam width must be at least 1".into()));
    }
    let mut g = Graph::new(&model.store);
    let ctx = model.prepare(&mut g, input)?;
    let qw = ctx.question_weights.map(|a| g.value(a).data().to_vec());
    let mut beam = alloc::vec![Hyp {
        state: model.init_state(&mut g, &ctx),
        ids: Vec::new(),
        log_prob: 0.0,
    }];
    let mut done: Vec<(Vec<usize>, f64)> = Vec::new();
    for step in 0..max_len {
        let mut cands: Vec<(f64, usize, usize, State)> = Vec::new();
        for (hi, h) in beam.iter().enumerate() {
            let (next, out) = model.step(&mut g, &ctx, &h.state)?;
            for (id, &p) in g.value(out.dist).data().iter().enumerate() {
                if p > 0.0 {
                    cands.push((h.log_prob + math::ln(p), hi, id, next));
                }
            }
        }
        // Best first; ties keep hypothesis order, then lower id.
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        cands.truncate(width);
        let mut next_beam = Vec::with_capacity(cands.len());
        for (lp, hi, id, state) in cands {
            let mut ids = beam[hi].ids.clone();
            ids.push(id);
            if id == EOS || step + 1 == max_len {
                done.push((ids, lp));
            } else {
                next_beam.push(Hyp {
                    state: state.feed(&ctx, id),
                    ids,
                    log_prob: lp,
                });
            }
        }
        beam = next_beam;
        if beam.is_empty() {
            break;
        }
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for (ids, lp) in done {
        let score = lp / ids.len() as f64;
        if best.as_ref().map_or(true, |(b, blp)| score > blp / b.len() as f64) {
            best = Some((ids, lp));
        }
    }
    let (ids, lp) = best.ok_or_else(|| Error::Data("beam search produced no sequence".into()))?;
    Ok(finish(model, &ctx, ids, lp, qw))
}

/// Total log-probability of emitting exactly `ids` (teacher forced).
pub fn sequence_log_prob(model: &Model, input: &Input<'_>, ids: &[usize]) -> Result<f64> {
    let mut g = Graph::new(&model.store);
    let ctx = model.prepare(&mut g, input)?;
    let mut st = model.init_state(&mut g, &ctx);
    let mut lp = 0.0;
    for &id in ids {
        let (next, out) = model.step(&mut g, &ctx, &st)?;
        lp += math::ln(g.value(out.dist).data()[id]);
        st = next.feed(&ctx, id);
    }
    Ok(lp)
}
