//! Corpus BLEU and ROUGE-L over token sequences.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

fn check<T>(candidates: &[Vec<T>], references: &[Vec<Vec<T>>]) -> Result<()> {
    if candidates.len() != references.len() {
        return Err(Error::Data(alloc::format!(
            "{} candidates but {} reference sets",
            candidates.len(),
            references.len()
        )));
    }
    if let Some(i) = references.iter().position(|r| r.is_empty()) {
        return Err(Error::Data(alloc::format!("candidate {i} has no references")));
    }
    Ok(())
}

fn ngram_counts<T: Ord>(seq: &[T], n: usize) -> BTreeMap<&[T], usize> {
    let mut m = BTreeMap::new();
    if seq.len() >= n {
        for w in seq.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Clipped n-gram matches and candidate n-gram total for order `n`.
pub fn modified_counts<T: Ord>(candidate: &[T], references: &[Vec<T>], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let mut max_ref: BTreeMap<&[T], usize> = BTreeMap::new();
    for r in references {
        for (g, c) in ngram_counts(r, n) {
            let e = max_ref.entry(g).or_insert(0);
            *e = (*e).max(c);
        }
    }
    let matched = cand
        .iter()
        .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
        .sum();
    (matched, candidate.len().saturating_sub(n - 1))
}

/// Reference length closest to `len`; ties go to the shorter one.
pub fn closest_ref_len<T>(len: usize, references: &[Vec<T>]) -> usize {
    references
        .iter()
        .map(|r| r.len())
        .min_by_key(|&r| (r.abs_diff(len), r))
        .unwrap_or(0)
}

/// Corpus BLEU-1 through BLEU-`max_n`, unsmoothed.
pub fn bleu<T: Ord>(candidates: &[Vec<T>], references: &[Vec<Vec<T>>], max_n: usize) -> Result<Vec<f64>> {
    check(candidates, references)?;
    if max_n == 0 {
        return Err(Error::Config("max_n must be at least 1".into()));
    }
    let mut matched = vec![0usize; max_n];
    let mut total = vec![0usize; max_n];
    let (mut c, mut r) = (0usize, 0usize);
    for (cand, refs) in candidates.iter().zip(references) {
        for n in 1..=max_n {
            let (m, t) = modified_counts(cand, refs, n);
            matched[n - 1] += m;
            total[n - 1] += t;
        }
        c += cand.len();
        r += closest_ref_len(cand.len(), refs);
    }
    let bp = if c == 0 {
        0.0
    } else if c > r {
        1.0
    } else {
        math::exp(1.0 - r as f64 / c as f64)
    };
    let mut out = Vec::with_capacity(max_n);
    let mut log_sum = 0.0;
    let mut zero = false;
    for n in 0..max_n {
        if matched[n] == 0 {
            zero = true;
        } else {
            log_sum += math::ln(matched[n] as f64 / total[n] as f64);
        }
        out.push(if zero || bp == 0.0 {
            0.0
        } else {
            bp * math::exp(log_sum / (n + 1) as f64)
        });
    }
    Ok(out)
}

/// Longest common subsequence length.
pub fn lcs<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F of one candidate against one reference.
pub fn rouge_l_pair<T: PartialEq>(candidate: &[T], reference: &[T], beta: f64) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let l = lcs(candidate, reference) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let r = l / reference.len() as f64;
    let p = l / candidate.len() as f64;
    let b2 = beta * beta;
    (1.0 + b2) * r * p / (r + b2 * p)
}

/// Per-sample ROUGE-L F, the best over each sample's references.
pub fn rouge_l_scores<T: PartialEq>(candidates: &[Vec<T>], references: &[Vec<Vec<T>>], beta: f64) -> Result<Vec<f64>> {
    check(candidates, references)?;
    Ok(candidates
        .iter()
        .zip(references)
        .map(|(c, refs)| refs.iter().map(|r| rouge_l_pair(c, r, beta)).fold(0.0, f64::max))
        .collect())
}

/// Mean per-sample ROUGE-L F.
pub fn rouge_l<T: PartialEq>(candidates: &[Vec<T>], references: &[Vec<Vec<T>>], beta: f64) -> Result<f64> {
    let s = rouge_l_scores(candidates, references, beta)?;
    Ok(math::mean(&s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn hand_counted_bigram_case() {
        let b = bleu(&[toks("a b c")], &[vec![toks("a b d")]], 4).unwrap();
        assert!((b[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((b[1] - (2.0f64 / 3.0 * 0.5).sqrt()).abs() < 1e-12);
        assert!((b[1] - 0.5774).abs() < 1e-4);
        assert_eq!(b[2], 0.0);
    }

    #[test]
    fn identical_is_one() {
        let c = toks("what is the PH0 of x");
        let b = bleu(&[c.clone()], &[vec![c.clone()]], 4).unwrap();
        assert!(b.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        assert!((rouge_l(&[c.clone()], &[vec![c]], 1.2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rouge_hand_case() {
        let f = rouge_l(&[toks("a c d")], &[vec![toks("a b c d")]], 1.2).unwrap();
        let (r, p, b2) = (0.75, 1.0, 1.44);
        assert!((f - (1.0 + b2) * r * p / (r + b2 * p)).abs() < 1e-12);
    }

    #[test]
    fn empty_candidate_scores_zero() {
        let e: Vec<&str> = Vec::new();
        assert_eq!(bleu(&[e.clone()], &[vec![toks("a")]], 4).unwrap(), vec![0.0; 4]);
        assert_eq!(rouge_l(&[e], &[vec![toks("a")]], 1.2).unwrap(), 0.0);
    }

    #[test]
    fn brevity_tie_prefers_shorter() {
        assert_eq!(closest_ref_len(3, &[toks("a b"), toks("a b c d")]), 2);
    }

    #[test]
    fn mismatched_inputs_rejected() {
        assert!(bleu(&[toks("a")], &[], 4).is_err());
        assert!(rouge_l(&[toks("a")], &[vec![]], 1.2).is_err());
    }
}
