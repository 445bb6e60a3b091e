mod common;

use cqg_core::model::{beam, greedy, sequence_log_prob, Ablation, Input, Variant};
use cqg_core::tensor::Graph;
use cqg_core::text::Token;
use cqg_core::vocab::EOS;

#[test]
fn width_one_beam_is_greedy() {
    let (samples, simple) = common::corpus(31, 8, 8);
    let tables = common::tables(&samples, &simple);
    for v in Variant::ALL {
        let model = common::model(v, Ablation::default(), &tables, 12);
        for s in &samples {
            let qs = common::subquestions(v, s, &simple, 2);
            let refs: Vec<&[Token]> = qs.iter().map(|q| q.as_slice()).collect();
            let input = Input {
                graph: &s.graph,
                subquestions: &refs,
            };
            let g = greedy(&model, &input, 10).unwrap();
            let b = beam(&model, &input, 10, 1).unwrap();
            assert_eq!(g.ids, b.ids);
            assert!((g.log_prob - b.log_prob).abs() <= 1e-12);
            let lp = sequence_log_prob(&model, &input, &b.ids).unwrap();
            assert!((lp - b.log_prob).abs() <= 1e-9);
        }
    }
}

/// Scores every output sequence of at most two steps.
fn exhaustive_best(model: &cqg_core::model::Model, input: &Input<'_>) -> (Vec<usize>, f64) {
    let mut g = Graph::new(&model.store);
    let ctx = model.prepare(&mut g, input).unwrap();
    let st = model.init_state(&mut g, &ctx);
    let (next, out) = model.step(&mut g, &ctx, &st).unwrap();
    let first = g.value(out.dist).data().to_vec();
    let mut best: (Vec<usize>, f64) = (Vec::new(), f64::NEG_INFINITY);
    for (i, &p) in first.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        if i == EOS {
            if p.ln() > best.1 {
                best = (vec![i], p.ln());
            }
            continue;
        }
        let s2 = next.feed(&ctx, i);
        let (_, out2) = model.step(&mut g, &ctx, &s2).unwrap();
        for (j, &q) in g.value(out2.dist).data().iter().enumerate() {
            if q > 0.0 {
                let score = (p.ln() + q.ln()) / 2.0;
                if score > best.1 {
                    best = (vec![i, j], score);
                }
            }
        }
    }
    best
}

#[test]
fn wide_beam_finds_the_best_short_sequence() {
    let (samples, simple) = common::corpus(32, 6, 8);
    let tables = common::tables(&samples, &simple);
    for v in [Variant::Cog2q, Variant::Cogsub2q] {
        let model = common::model(v, Ablation::default(), &tables, 13);
        for s in &samples {
            let qs = common::subquestions(v, s, &simple, 1);
            let refs: Vec<&[Token]> = qs.iter().map(|q| q.as_slice()).collect();
            let input = Input {
                graph: &s.graph,
                subquestions: &refs,
            };
            let (ids, score) = exhaustive_best(&model, &input);
            let width = (model.vocab_size() + s.graph.triples.len()).pow(2);
            let b = beam(&model, &input, 2, width).unwrap();
            assert_eq!(b.ids, ids);
            assert!((b.normalized_score() - score).abs() <= 1e-12);
        }
    }
}

#[test]
fn decoding_is_deterministic() {
    let (samples, simple) = common::corpus(33, 4, 8);
    let tables = common::tables(&samples, &simple);
    let model = common::model(Variant::Cogsubm2q, Ablation::default(), &tables, 1);
    let s = &samples[0];
    let qs = common::subquestions(Variant::Cogsubm2q, s, &simple, 3);
    let refs: Vec<&[Token]> = qs.iter().map(|q| q.as_slice()).collect();
    let input = Input {
        graph: &s.graph,
        subquestions: &refs,
    };
    assert_eq!(beam(&model, &input, 8, 3).unwrap(), beam(&model, &input, 8, 3).unwrap());
    let d = greedy(&model, &input, 8).unwrap();
    let w = d.question_weights.unwrap();
    assert_eq!(w.len(), qs.len());
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn subquestion_variants_need_subquestions() {
    let (samples, simple) = common::corpus(34, 2, 6);
    let tables = common::tables(&samples, &simple);
    let model = common::model(Variant::Cogsub2q, Ablation::default(), &tables, 1);
    let err = greedy(&model, &Input::graph_only(&samples[0].graph), 5).unwrap_err();
    assert!(matches!(err, cqg_core::Error::EmptyPool(_)));
}
