mod common;

use common::checks::random_steps;
use cqg_core::model::{Ablation, Variant};
use cqg_core::text::Token;

#[test]
fn output_mass_is_one() {
    for v in Variant::ALL {
        for (name, a) in common::ablations() {
            random_steps(v, a, |_, g, ctx, out, _| {
                let p = g.value(out.dist).data();
                assert_eq!(p.len(), ctx.output_size());
                let total: f64 = p.iter().sum();
                assert!((total - 1.0).abs() <= 1e-9, "{} {name}: mass {total}", v.as_str());
                assert!(p.iter().all(|&x| x >= 0.0));
            });
        }
    }
}

#[test]
fn placeholders_only_on_grounded_relations() {
    for v in Variant::ALL {
        random_steps(v, Ablation::default(), |_, g, ctx, out, _| {
            if let Some(a) = out.placeholder_attention {
                for (j, &x) in g.value(a).data().iter().enumerate() {
                    if !ctx.grounded_mask[j] {
                        assert_eq!(x, 0.0);
                    }
                }
            } else {
                assert!(ctx.grounded.is_empty());
            }
        });
    }
}

#[test]
fn reserved_outputs_get_no_mass() {
    use cqg_core::vocab::{BOS, DELIM, PH};
    random_steps(Variant::Cogsub2q, Ablation::default(), |_, g, _, out, _| {
        let p = g.value(out.dist).data();
        assert_eq!((p[BOS], p[DELIM], p[PH]), (0.0, 0.0, 0.0));
    });
}

#[test]
fn copy_mass_only_on_subquestion_words() {
    for v in [Variant::Cogsub2q, Variant::Cogsubm2q] {
        random_steps(v, Ablation::default(), |model, g, _, out, subqs| {
            assert_eq!(out.heads.len(), subqs.len());
            for (head, q) in out.heads.iter().zip(subqs) {
                let present: Vec<usize> = q
                    .iter()
                    .filter_map(|t| match t {
                        Token::Word(w) => Some(model.tables.words.id(w)),
                        Token::Placeholder(_) => None,
                    })
                    .collect();
                let keep = 1.0 - g.value(head.p_copy).item();
                let gen = g.value(head.generate).data();
                for (w, &x) in g.value(head.vocab).data().iter().enumerate() {
                    if !present.contains(&w) {
                        assert_eq!(x, keep * gen[w], "word {w} received copy mass");
                    }
                }
            }
        });
    }
}

#[test]
fn copy_mass_is_conserved() {
    for v in [Variant::Cogsub2q, Variant::Cogsubm2q] {
        random_steps(v, Ablation::default(), |_, g, ctx, out, _| {
            for head in &out.heads {
                let pc = g.value(head.p_copy).item();
                let keep_ph = 1.0 - g.value(head.p_ph).item();
                let gen = g.value(head.generate).data();
                let dist = g.value(head.dist).data();
                let copied: f64 = (0..ctx.vocab_size)
                    .map(|w| dist[w] - (1.0 - pc) * gen[w] * keep_ph)
                    .sum();
                assert!((copied - pc * keep_ph).abs() <= 1e-9);
            }
        });
    }
}

#[test]
fn aggregation_keeps_common_zeros() {
    random_steps(Variant::Cogsubm2q, Ablation::default(), |_, g, _, out, _| {
        let heads: Vec<&[f64]> = out.heads.iter().map(|h| g.value(h.dist).data()).collect();
        for (i, &p) in g.value(out.dist).data().iter().enumerate() {
            if heads.iter().all(|h| h[i] == 0.0) {
                assert_eq!(p, 0.0);
            }
        }
    });
}

#[test]
fn ablations_change_only_their_feature_slices() {
    let (samples, simple) = common::corpus(21, 4, 8);
    let tables = common::tables(&samples, &simple);
    for (name, a) in common::ablations() {
        let model = common::model(Variant::Cog2q, a, &tables, 1);
        let c = &model.config;
        let mut width = 6 * c.embed_dim + c.name_dim;
        if a.no_inverse_predicate {
            width -= c.embed_dim;
        }
        if a.no_names {
            width -= c.name_dim;
        }
        let w = model.store.get(model.store.id("relation.W").unwrap());
        assert_eq!(w.shape(), [c.relation_dim, width], "{name}");
        let names = model.parameter_names();
        assert_eq!(names.iter().any(|n| n.starts_with("name.")), !a.no_names, "{name}");
        assert_eq!(names.iter().any(|n| n.starts_with("dec.attn.")), !a.no_attention, "{name}");
        let full = common::model(Variant::Cog2q, Ablation::default(), &tables, 1);
        for n in &names {
            if let Some(id) = full.store.id(n) {
                if n != "relation.W" {
                    assert_eq!(full.store.get(id).shape(), model.store.get(model.store.id(n).unwrap()).shape());
                }
            }
        }
    }
}
