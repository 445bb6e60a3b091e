//! Teacher-forced loss, Adam and the training loop.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::model::{Input, Model, Variant};
use crate::preprocess::Sample;
use crate::kg::QueryGraph;
use crate::tensor::{check_gradients, GradientReport, Gradients, Graph, ParameterStore, Var};
use crate::text::{Token, TokenSequence};
use crate::vocab::EOS;

/// Where sub-questions come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubqMode {
    None,
    /// The sample's paired sub-question.
    Corresponding,
    /// One uniformly drawn pseudo sub-question.
    RandomPseudo,
    /// Up to `m` pseudo sub-questions, the first of a seeded shuffle.
    TopM,
}

impl SubqMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SubqMode::None => "none",
            SubqMode::Corresponding => "corresponding",
            SubqMode::RandomPseudo => "random_pseudo",
            SubqMode::TopM => "multi",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [SubqMode::None, SubqMode::Corresponding, SubqMode::RandomPseudo, SubqMode::TopM]
            .into_iter()
            .find(|m| m.as_str() == s || (s == "top_m" && *m == SubqMode::TopM))
    }

    /// The mode a variant trains with unless told otherwise.
    pub fn default_for(v: Variant) -> Self {
        match v {
            Variant::Cog2q | Variant::EncDec => SubqMode::None,
            Variant::Cogsub2q => SubqMode::Corresponding,
            Variant::Cogsubm2q => SubqMode::TopM,
        }
    }

    /// Whether `v` can decode with sub-questions chosen by this mode.
    pub fn compatible(self, v: Variant) -> bool {
        match v {
            Variant::Cog2q | Variant::EncDec => self == SubqMode::None,
            Variant::Cogsub2q => matches!(self, SubqMode::Corresponding | SubqMode::RandomPseudo),
            Variant::Cogsubm2q => self != SubqMode::None,
        }
    }
}

/// SplitMix64 step, used to derive independent per-sample seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sub-questions chosen for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub questions: Vec<TokenSequence>,
    /// Simple-corpus index of each question; `None` for the paired one.
    pub sources: Vec<Option<usize>>,
}

/// A pseudo sub-question with placeholder indices dropped.
pub fn pool_question(simple: &[Sample], id: usize) -> Result<TokenSequence> {
    let s = simple
        .get(id)
        .ok_or_else(|| Error::Data(format!("pseudo pool id {id} outside the simple corpus")))?;
    let r = s
        .references
        .first()
        .ok_or_else(|| Error::Data(format!("simple question {id} has no text")))?;
    Ok(r.iter().map(Token::unindexed).collect())
}

/// Picks sub-questions for `sample` according to `mode`, with randomness
/// fully determined by `seed`.
pub fn sample_pool(sample: &Sample, simple: &[Sample], mode: SubqMode, m: usize, seed: u64) -> Result<Selection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = &sample.pseudo_pool;
    let ids: Vec<usize> = match mode {
        SubqMode::None => {
            return Ok(Selection {
                questions: Vec::new(),
                sources: Vec::new(),
            })
        }
        SubqMode::Corresponding => {
            let q = sample
                .subquestion
                .clone()
                .ok_or_else(|| Error::EmptyPool("sample has no paired sub-question".into()))?;
            return Ok(Selection {
                questions: alloc::vec![q],
                sources: alloc::vec![None],
            });
        }
        SubqMode::RandomPseudo => {
            let &id = pool
                .choose(&mut rng)
                .ok_or_else(|| Error::EmptyPool("empty pseudo pool".into()))?;
            alloc::vec![id]
        }
        SubqMode::TopM => {
            if pool.is_empty() {
                return Err(Error::EmptyPool("empty pseudo pool".into()));
            }
            let mut p = pool.clone();
            p.shuffle(&mut rng);
            p.truncate(m.max(1));
            p
        }
    };
    Ok(Selection {
        questions: ids.iter().map(|&i| pool_question(simple, i)).collect::<Result<_>>()?,
        sources: ids.into_iter().map(Some).collect(),
    })
}

/// Weights of the training objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub coverage: f64,
    pub l2: f64,
}

/// Scalar pieces of one example's loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    /// Objective including every term.
    pub total: f64,
    /// Mean negative log-likelihood per target token.
    pub nll: f64,
    /// Mean coverage penalty per target token (unweighted).
    pub coverage: f64,
    /// Number of targets, the reference length plus EOS.
    pub targets: usize,
}

/// Records `(Σ_t -log P(w*_t) + λ_cov Σ_t Σ_j min(a_tj, c_tj)) / T + λ_l2 Σ θ²`
/// under teacher forcing, with `T` the reference length plus one for EOS.
pub fn build_loss(
    model: &Model,
    g: &mut Graph<'_>,
    input: &Input<'_>,
    reference: &[Token],
    w: LossWeights,
) -> Result<(Var, LossValue)> {
    if reference.is_empty() {
        return Err(Error::Data("empty reference".into()));
    }
    let ctx = model.prepare(g, input)?;
    let mut targets = reference
        .iter()
        .map(|t| ctx.target_id(model, t))
        .collect::<Result<Vec<_>>>()?;
    targets.push(EOS);
    let mut st = model.init_state(g, &ctx);
    let mut nll = Vec::with_capacity(targets.len());
    let mut cov = Vec::new();
    for &y in &targets {
        let (next, out) = model.step(g, &ctx, &st)?;
        nll.push(g.neg_log_pick(out.dist, y)?);
        if let (Some(a), Some(c)) = (out.attention, out.coverage) {
            let m = g.minimum(a, c)?;
            cov.push(g.reduce_sum(m));
        }
        st = next.feed(&ctx, y);
    }
    let t = targets.len() as f64;
    let nll_sum = g.sum(&nll)?;
    let nll_v = g.value(nll_sum).item();
    let mut total = nll_sum;
    let mut cov_v = 0.0;
    if !cov.is_empty() {
        let c = g.sum(&cov)?;
        cov_v = g.value(c).item();
        if w.coverage != 0.0 {
            let c = g.scale(c, w.coverage);
            total = g.add(total, c)?;
        }
    }
    total = g.scale(total, 1.0 / t);
    if w.l2 != 0.0 {
        let store = g.store();
        let mut sq = Vec::with_capacity(store.len());
        for id in store.ids() {
            let p = g.param(id);
            let h = g.hadamard(p, p)?;
            sq.push(g.reduce_sum(h));
        }
        let l2 = g.sum(&sq)?;
        let l2 = g.scale(l2, w.l2);
        total = g.add(total, l2)?;
    }
    let value = LossValue {
        total: g.value(total).item(),
        nll: nll_v / t,
        coverage: cov_v / t,
        targets: targets.len(),
    };
    Ok((total, value))
}

/// Loss and parameter gradients of one example.
pub fn loss_and_grad(model: &Model, input: &Input<'_>, reference: &[Token], w: LossWeights) -> Result<(LossValue, Gradients)> {
    let mut g = Graph::new(&model.store);
    let (l, v) = build_loss(model, &mut g, input, reference, w)?;
    Ok((v, g.backward(l)?))
}

/// Loss value only.
pub fn loss_value(model: &Model, input: &Input<'_>, reference: &[Token], w: LossWeights) -> Result<LossValue> {
    let mut g = Graph::new(&model.store);
    Ok(build_loss(model, &mut g, input, reference, w)?.1)
}

/// Finite-difference check of [`build_loss`] summed over `examples`, each a
/// graph, its sub-questions and one reference.
pub fn check_model_gradients(
    model: &mut Model,
    examples: &[(&QueryGraph, Vec<TokenSequence>, TokenSequence)],
    w: LossWeights,
    eps: f64,
) -> Result<GradientReport> {
    let mut store = core::mem::replace(&mut model.store, ParameterStore::new(0));
    let m: &Model = model;
    let report = check_gradients(&mut store, eps, |g| {
        let mut parts = Vec::with_capacity(examples.len());
        for (graph, subqs, reference) in examples {
            let qs: Vec<&[Token]> = subqs.iter().map(|q| q.as_slice()).collect();
            let input = Input {
                graph,
                subquestions: &qs,
            };
            parts.push(build_loss(m, g, &input, reference, w)?.0);
        }
        g.sum(&parts)
    });
    model.store = store;
    report
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of every parameter; increments the step.
pub fn adam_step(store: &mut ParameterStore, grads: &Gradients, lr: f64, cfg: &AdamConfig) {
    let t = store.step() + 1;
    store.set_step(t);
    let c1 = 1.0 - libm::pow(cfg.beta1, t as f64);
    let c2 = 1.0 - libm::pow(cfg.beta2, t as f64);
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let g = grads.get(id);
        let (theta, m, v) = store.slots_mut(id);
        for k in 0..theta.len() {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            let mh = m[k] / c1;
            let vh = v[k] / c2;
            theta[k] -= lr * mh / (math::sqrt(vh) + cfg.eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub adam: AdamConfig,
    pub lr_decay: f64,
    pub lambda_cov: f64,
    pub lambda_l2: f64,
    pub max_epochs: usize,
    /// Stop after this many consecutive epochs without dev improvement.
    pub patience: usize,
    pub seed: u64,
    /// Accumulate the whole epoch into one update instead of per-sample updates.
    pub full_batch: bool,
    pub subq_mode: SubqMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            adam: AdamConfig::default(),
            lr_decay: 0.8,
            lambda_cov: 0.1,
            lambda_l2: 1e-4,
            max_epochs: 100,
            patience: 20,
            seed: 7,
            full_batch: false,
            subq_mode: SubqMode::None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config("need lr > 0 and 0 < lr_decay <= 1".into()));
        }
        if !(self.lambda_cov >= 0.0 && self.lambda_l2 >= 0.0) {
            return Err(Error::Config("loss weights must be non-negative".into()));
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return Err(Error::Config("adam betas must be in [0, 1) and eps > 0".into()));
        }
        Ok(())
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            coverage: self.lambda_cov,
            l2: self.lambda_l2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean objective over updated samples.
    pub train_loss: f64,
    /// Mean per-token negative log-likelihood over updated samples.
    pub train_nll: f64,
    /// Mean per-token NLL plus weighted coverage over dev samples and references.
    pub dev_loss: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_dev_loss: f64,
    /// Training samples skipped per epoch for lack of a sub-question source.
    pub skipped: usize,
    pub stopped_early: bool,
}

/// Sub-questions for training or dev scoring.
fn selection_for(
    model: &Model,
    cfg: &TrainConfig,
    sample: &Sample,
    simple: &[Sample],
    seed: u64,
) -> Result<Selection> {
    if !model.config.variant.uses_subquestions() {
        return Ok(Selection {
            questions: Vec::new(),
            sources: Vec::new(),
        });
    }
    sample_pool(sample, simple, cfg.subq_mode, model.config.m, seed)
}

fn with_input<T>(sample: &Sample, sel: &Selection, f: impl FnOnce(&Input<'_>) -> Result<T>) -> Result<T> {
    let qs: Vec<&[Token]> = sel.questions.iter().map(|q| q.as_slice()).collect();
    f(&Input {
        graph: &sample.graph,
        subquestions: &qs,
    })
}

/// Mean per-token loss (without the L2 term) over samples and all their references.
pub fn dev_loss(model: &Model, cfg: &TrainConfig, samples: &[Sample], simple: &[Sample]) -> Result<f64> {
    let w = LossWeights {
        coverage: cfg.lambda_cov,
        l2: 0.0,
    };
    let mut total = 0.0;
    let mut n = 0usize;
    for (i, s) in samples.iter().enumerate() {
        let sel = match selection_for(model, cfg, s, simple, mix_seed(cfg.seed, i as u64)) {
            Ok(sel) => sel,
            Err(Error::EmptyPool(_)) => continue,
            Err(e) => return Err(e),
        };
        let mut per = 0.0;
        for r in &s.references {
            per += with_input(s, &sel, |inp| loss_value(model, inp, r, w))?.total;
        }
        total += per / s.references.len() as f64;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Data("no usable dev samples".into()));
    }
    Ok(total / n as f64)
}

/// Trains `model` in place and leaves it at the parameters with the best
/// dev loss. `on_best` runs whenever the dev loss improves.
pub fn train<F>(
    model: &mut Model,
    train_set: &[Sample],
    dev_set: &[Sample],
    simple: &[Sample],
    cfg: &TrainConfig,
    mut on_best: F,
) -> Result<TrainReport>
where
    F: FnMut(&Model, &EpochStats) -> Result<()>,
{
    cfg.validate()?;
    if train_set.is_empty() || dev_set.is_empty() {
        return Err(Error::Data("training needs non-empty train and dev splits".into()));
    }
    if model.config.variant.uses_subquestions() != (cfg.subq_mode != SubqMode::None)
        || !cfg.subq_mode.compatible(model.config.variant) && cfg.subq_mode != SubqMode::TopM
    {
        return Err(Error::Config(format!(
            "sub-question mode {} does not fit model {}",
            cfg.subq_mode.as_str(),
            model.config.variant.as_str()
        )));
    }
    let w = cfg.weights();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut lr = cfg.lr;
    let mut best = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_store = model.store.clone();
    let mut bad = 0;
    let mut epochs = Vec::new();
    let mut skipped = 0;
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut acc: Option<Gradients> = None;
        let (mut loss_sum, mut nll_sum, mut used) = (0.0, 0.0, 0usize);
        skipped = 0;
        for &i in &order {
            let s = &train_set[i];
            let r = rng.gen_range(0..s.references.len());
            let draw: u64 = rng.gen();
            let seed = match cfg.subq_mode {
                SubqMode::RandomPseudo | SubqMode::TopM => draw,
                _ => mix_seed(cfg.seed, i as u64),
            };
            let sel = match selection_for(model, cfg, s, simple, seed) {
                Ok(sel) => sel,
                Err(Error::EmptyPool(_)) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let (v, grads) = with_input(s, &sel, |inp| loss_and_grad(model, inp, &s.references[r], w))?;
            if !v.total.is_finite() || !grads.is_finite() {
                return Err(Error::Divergence { epoch, loss: v.total });
            }
            loss_sum += v.total;
            nll_sum += v.nll;
            used += 1;
            if cfg.full_batch {
                match &mut acc {
                    Some(a) => a.accumulate(&grads, 1.0),
                    None => acc = Some(grads),
                }
            } else {
                adam_step(&mut model.store, &grads, lr, &cfg.adam);
            }
        }
        if used == 0 {
            return Err(Error::Data("no training sample has a usable sub-question source".into()));
        }
        if let Some(mut a) = acc {
            a.scale(1.0 / used as f64);
            adam_step(&mut model.store, &a, lr, &cfg.adam);
        }
        let dev = dev_loss(model, cfg, dev_set, simple)?;
        if !dev.is_finite() {
            return Err(Error::Divergence { epoch, loss: dev });
        }
        let improved = dev < best;
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / used as f64,
            train_nll: nll_sum / used as f64,
            dev_loss: dev,
            lr,
            improved,
        };
        epochs.push(stats);
        if improved {
            best = dev;
            best_epoch = epoch;
            best_store = model.store.clone();
            bad = 0;
            on_best(model, &stats)?;
        } else {
            lr *= cfg.lr_decay;
            bad += 1;
            if bad >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    model.store = best_store;
    Ok(TrainReport {
        epochs,
        best_epoch,
        best_dev_loss: best,
        skipped,
        stopped_early,
    })
}
