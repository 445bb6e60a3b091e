mod common;

use common::oracles::{exhaustive_lcs, oracle_bleu, oracle_rouge, random_corpus, random_seq, Seq};
use cqg_core::metrics::{bleu, lcs, modified_counts, rouge_l, rouge_l_pair};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn bleu_and_rouge_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..200 {
        let (c, r) = random_corpus(&mut rng);
        let got = bleu(&c, &r, 4).unwrap();
        let want = oracle_bleu(&c, &r, 4);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-9, "case {case}: {got:?} vs {want:?}");
        }
        let (g, w) = (rouge_l(&c, &r, 1.2).unwrap(), oracle_rouge(&c, &r, 1.2));
        assert!((g - w).abs() <= 1e-9, "case {case}: {g} vs {w}");
    }
}

#[test]
fn lcs_matches_subsequence_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..500 {
        let a = random_seq(&mut rng, 4, 8);
        let b = random_seq(&mut rng, 4, 8);
        assert_eq!(lcs(&a, &b), exhaustive_lcs(&a, &b));
    }
}

#[test]
fn hand_cases() {
    let b = bleu(&[vec!["a", "b", "c"]], &[vec![vec!["a", "b", "d"]]], 4).unwrap();
    assert!((b[0] - 2.0 / 3.0).abs() < 1e-12);
    assert!((b[1] - 0.5774).abs() < 5e-5);
    let f = rouge_l_pair(&["a", "c", "d"], &["a", "b", "c", "d"], 1.2);
    let (r, p) = (0.75, 1.0);
    assert!((f - 2.44 * r * p / (r + 1.44 * p)).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn scores_ignore_sample_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, r) = random_corpus(&mut rng);
        let mut order: Vec<usize> = (0..c.len()).collect();
        order.shuffle(&mut rng);
        let c2: Vec<Seq> = order.iter().map(|&i| c[i].clone()).collect();
        let r2: Vec<Vec<Seq>> = order.iter().map(|&i| r[i].clone()).collect();
        let (a, b) = (bleu(&c, &r, 4).unwrap(), bleu(&c2, &r2, 4).unwrap());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        prop_assert!((rouge_l(&c, &r, 1.2).unwrap() - rouge_l(&c2, &r2, 1.2).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn duplicate_reference_changes_nothing(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, r) = random_corpus(&mut rng);
        let mut r2 = r.clone();
        let i = rng.gen_range(0..r2.len());
        let j = rng.gen_range(0..r2[i].len());
        let dup = r2[i][j].clone();
        r2[i].push(dup);
        prop_assert_eq!(bleu(&c, &r, 4).unwrap(), bleu(&c, &r2, 4).unwrap());
        prop_assert_eq!(rouge_l(&c, &r, 1.2).unwrap(), rouge_l(&c, &r2, 1.2).unwrap());
    }

    #[test]
    fn appending_a_token_never_lowers_matches(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, r) = random_corpus(&mut rng);
        let mut longer = c[0].clone();
        let reference = &r[0][rng.gen_range(0..r[0].len())];
        longer.push(*reference.choose(&mut rng).unwrap());
        prop_assert!(modified_counts(&longer, &r[0], n).0 >= modified_counts(&c[0], &r[0], n).0);
    }

    #[test]
    fn scores_are_fractions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, r) = random_corpus(&mut rng);
        for x in bleu(&c, &r, 4).unwrap().into_iter().chain([rouge_l(&c, &r, 1.2).unwrap()]) {
            prop_assert!((0.0..=1.0).contains(&x));
        }
    }
}
