//! Randomized model and primitive checks shared by several test targets.

use cqg_core::model::{Ablation, Context, Input, Model, StepOut, Variant};
use cqg_core::preprocess::Sample;
use cqg_core::tensor::{check_gradients, Graph, Init, ParamId, ParameterStore, Primitive, Tensor, Var};
use cqg_core::text::Token;
use cqg_core::training::{check_model_gradients, LossWeights};
use cqg_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 1e-5;
pub const CASES: u64 = 100;

pub fn randomized(store: &mut ParameterStore, rng: &mut ChaCha8Rng, name: &str, shape: &[usize]) -> ParamId {
    let id = store.create(name, shape, Init::Zeros).unwrap();
    for x in store.value_mut(id) {
        *x = rng.gen_range(-1.5..1.5);
    }
    id
}

/// Reduces any tensor to a scalar through a fixed random weighting.
pub fn project(g: &mut Graph<'_>, x: Var, rng: &mut ChaCha8Rng) -> Result<Var> {
    let shape = g.shape(x).to_vec();
    let n: usize = shape.iter().product();
    let w = Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let w = g.constant(w);
    let h = g.hadamard(x, w)?;
    Ok(g.reduce_sum(h))
}

/// Builds a random instance exercising `p` and returns its worst relative error.
pub fn check_primitive(p: Primitive, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParameterStore::new(seed);
    let (m, k, n) = (rng.gen_range(1..5), rng.gen_range(1..5), rng.gen_range(1..5));
    let a = randomized(&mut store, &mut rng, "a", &[m, k]);
    let x = randomized(&mut store, &mut rng, "x", &[k]);
    let y = randomized(&mut store, &mut rng, "y", &[k]);
    let b = randomized(&mut store, &mut rng, "b", &[m]);
    let c = randomized(&mut store, &mut rng, "c", &[k, n]);
    let s = randomized(&mut store, &mut rng, "s", &[1]);
    // Keep the two minimum operands apart so the kink is never straddled.
    for i in 0..k {
        let (vx, vy) = (store.value(x).data()[i], store.value(y).data()[i]);
        if (vx - vy).abs() < 1e-2 {
            store.value_mut(y)[i] = vx + 0.5;
        }
    }
    let form = rng.gen_range(0..3);
    let idx: Vec<usize> = (0..rng.gen_range(1..6)).map(|_| rng.gen_range(0..k)).collect();
    let targets: Vec<Option<usize>> = (0..k)
        .map(|_| if rng.gen_bool(0.7) { Some(rng.gen_range(0..n)) } else { None })
        .collect();
    let mut mask: Vec<bool> = (0..k).map(|_| rng.gen_bool(0.6)).collect();
    mask[rng.gen_range(0..k)] = true;
    let row = rng.gen_range(0..m);
    let pick = rng.gen_range(0..k);
    let (alpha, beta) = (rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0));
    let proj_seed: u64 = rng.gen();

    let report = check_gradients(&mut store, EPS, |g| {
        let mut r = ChaCha8Rng::seed_from_u64(proj_seed);
        let (a, x, y, b, c, s) = (g.param(a), g.param(x), g.param(y), g.param(b), g.param(c), g.param(s));
        let out = match p {
            Primitive::Matmul => match form {
                0 => g.matmul(a, c)?,
                1 => g.matmul(a, x)?,
                _ => g.matmul(x, c)?,
            },
            Primitive::Affine => g.affine(a, x, b)?,
            Primitive::Concat => g.concat(&[x, b, y])?,
            Primitive::Stack => g.stack(&[x, y, x])?,
            Primitive::Add => g.add(x, y)?,
            Primitive::Hadamard => g.hadamard(x, y)?,
            Primitive::ScaleShift => g.scale_shift(x, alpha, beta),
            Primitive::ScalarMul => g.scalar_mul(s, x)?,
            Primitive::Tanh => g.tanh(x),
            Primitive::Sigmoid => g.sigmoid(x),
            Primitive::ReduceSum => {
                let t = g.tanh(x);
                let r = g.reduce_sum(t);
                return Ok(g.hadamard(r, r)?);
            }
            Primitive::Minimum => g.minimum(x, y)?,
            Primitive::EmbeddingLookup => g.embedding(a, row)?,
            Primitive::Gather => g.gather(x, &idx)?,
            Primitive::ScatterAdd => g.scatter_add(x, &targets, n)?,
            Primitive::MaskedSoftmax => g.masked_softmax(x, &mask)?,
            Primitive::NegLogPick => {
                let p = g.softmax(x)?;
                return g.neg_log_pick(p, pick);
            }
        };
        project(g, out, &mut r)
    })
    .unwrap();
    report.max_error
}

pub fn end_to_end(variant: Variant, ablation: Ablation) -> f64 {
    let (samples, simple) = super::corpus(3, 2, 6);
    let tables = super::tables(&samples, &simple);
    let mut model = super::model(variant, ablation, &tables, 5);
    let examples: Vec<_> = samples
        .iter()
        .map(|s| (&s.graph, super::subquestions(variant, s, &simple, 2), s.references[0].clone()))
        .collect();
    let w = LossWeights {
        coverage: 0.1,
        l2: 1e-3,
    };
    check_model_gradients(&mut model, &examples, w, EPS).unwrap().max_error
}

pub const STEPS: usize = 1000;

/// Runs `STEPS` decoder steps over random samples, feeding random outputs,
/// and hands every step to `check`.
pub fn random_steps(variant: Variant, ablation: Ablation, mut check: impl FnMut(&Model, &Graph<'_>, &Context, &StepOut, &[Vec<Token>])) {
    let (samples, simple) = super::corpus(21, 12, 10);
    let tables = super::tables(&samples, &simple);
    let model = super::model(variant, ablation, &tables, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut done = 0;
    while done < STEPS {
        let s: &Sample = &samples[rng.gen_range(0..samples.len())];
        let subqs = super::subquestions(variant, s, &simple, 3);
        let qs: Vec<&[Token]> = subqs.iter().map(|q| q.as_slice()).collect();
        let input = Input {
            graph: &s.graph,
            subquestions: &qs,
        };
        let mut g = Graph::new(&model.store);
        let ctx = model.prepare(&mut g, &input).unwrap();
        let mut st = model.init_state(&mut g, &ctx);
        for _ in 0..rng.gen_range(1..15) {
            let (next, out) = model.step(&mut g, &ctx, &st).unwrap();
            check(&model, &g, &ctx, &out, &subqs);
            done += 1;
            st = next.feed(&ctx, rng.gen_range(0..ctx.output_size()));
        }
    }
}

