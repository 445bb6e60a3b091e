//! Decoding a split and scoring it over repeated runs.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::metrics;
use crate::model::{beam, greedy, Input, Model};
use crate::preprocess::Sample;
use crate::text::{surfaces, Token, TokenSequence};
use crate::training::{mix_seed, sample_pool, SubqMode};

/// ROUGE-L recall weight.
pub const ROUGE_BETA: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeOptions {
    pub mode: SubqMode,
    pub max_len: usize,
    /// Beam width; 1 decodes greedily.
    pub beam: usize,
}

/// One decoded sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    /// Index of the sample in its split.
    pub index: usize,
    pub tokens: TokenSequence,
    pub log_prob: f64,
    /// Simple-corpus ids of the sub-questions used; `None` for a paired one.
    pub sources: Vec<Option<usize>>,
    pub question_weights: Option<Vec<f64>>,
}

fn check_mode(model: &Model, mode: SubqMode) -> Result<()> {
    if mode.compatible(model.config.variant) {
        Ok(())
    } else {
        Err(Error::Config(alloc::format!(
            "model {} cannot decode with sub-question mode {}",
            model.config.variant.as_str(),
            mode.as_str()
        )))
    }
}

/// Decodes one sample with sub-questions drawn from `seed`.
pub fn generate_one(
    model: &Model,
    sample: &Sample,
    simple: &[Sample],
    opts: &DecodeOptions,
    index: usize,
    seed: u64,
) -> Result<Generation> {
    let sel = sample_pool(sample, simple, opts.mode, model.config.m, seed)?;
    let qs: Vec<&[Token]> = sel.questions.iter().map(|q| q.as_slice()).collect();
    let input = Input {
        graph: &sample.graph,
        subquestions: &qs,
    };
    let d = if opts.beam <= 1 {
        greedy(model, &input, opts.max_len)?
    } else {
        beam(model, &input, opts.max_len, opts.beam)?
    };
    Ok(Generation {
        index,
        tokens: d.tokens,
        log_prob: d.log_prob,
        sources: sel.sources,
        question_weights: d.question_weights,
    })
}

/// Decodes every sample; samples without a sub-question source are
/// skipped and counted. Sample `i` draws with `mix_seed(seed, i)`.
pub fn generate_all(
    model: &Model,
    samples: &[Sample],
    simple: &[Sample],
    opts: &DecodeOptions,
    seed: u64,
) -> Result<(Vec<Generation>, usize)> {
    check_mode(model, opts.mode)?;
    let mut out = Vec::with_capacity(samples.len());
    let mut skipped = 0;
    for (i, s) in samples.iter().enumerate() {
        match generate_one(model, s, simple, opts, i, mix_seed(seed, i as u64)) {
            Ok(g) => out.push(g),
            Err(Error::EmptyPool(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((out, skipped))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunScores {
    pub seed: u64,
    /// BLEU-1..4 in [0, 1].
    pub bleu: Vec<f64>,
    pub rouge_l: f64,
    pub scored: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleResult {
    pub index: usize,
    pub generated: Vec<String>,
    pub references: Vec<Vec<String>>,
    pub sources: Vec<Option<usize>>,
    pub question_weights: Option<Vec<f64>>,
    pub rouge_l: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Mean BLEU-1..4 over runs.
    pub bleu: Vec<f64>,
    pub rouge_l: f64,
    pub bleu_stddev: Vec<f64>,
    pub rouge_l_stddev: f64,
    pub runs: Vec<RunScores>,
    /// Per-sample results of the first run.
    pub per_sample: Vec<SampleResult>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub decode: DecodeOptions,
    pub runs: usize,
    /// Run `i` draws sub-questions from `seed + i`.
    pub seed: u64,
}

/// Decodes `samples` `runs` times and reports mean and sample standard
/// deviation of every score.
pub fn evaluate(model: &Model, samples: &[Sample], simple: &[Sample], opts: &EvalOptions) -> Result<EvalReport> {
    if opts.runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    let mut runs = Vec::with_capacity(opts.runs);
    let mut per_sample = Vec::new();
    for r in 0..opts.runs {
        let seed = opts.seed.wrapping_add(r as u64);
        let (gens, skipped) = generate_all(model, samples, simple, &opts.decode, seed)?;
        if gens.is_empty() {
            return Err(Error::Data("no sample could be decoded".into()));
        }
        let cands: Vec<Vec<String>> = gens.iter().map(|g| surfaces(&g.tokens)).collect();
        let refs: Vec<Vec<Vec<String>>> = gens
            .iter()
            .map(|g| samples[g.index].references.iter().map(|t| surfaces(t)).collect())
            .collect();
        let bleu = metrics::bleu(&cands, &refs, 4)?;
        let rouge = metrics::rouge_l_scores(&cands, &refs, ROUGE_BETA)?;
        if r == 0 {
            per_sample = gens
                .into_iter()
                .zip(cands)
                .zip(refs)
                .zip(&rouge)
                .map(|(((g, c), rs), &f)| SampleResult {
                    index: g.index,
                    generated: c,
                    references: rs,
                    sources: g.sources,
                    question_weights: g.question_weights,
                    rouge_l: f,
                })
                .collect();
        }
        runs.push(RunScores {
            seed,
            bleu,
            rouge_l: math::mean(&rouge),
            scored: rouge.len(),
            skipped,
        });
    }
    let column = |k: usize| -> Vec<f64> { runs.iter().map(|r| r.bleu[k]).collect() };
    let rouges: Vec<f64> = runs.iter().map(|r| r.rouge_l).collect();
    Ok(EvalReport {
        bleu: (0..4).map(|k| math::mean(&column(k))).collect(),
        bleu_stddev: (0..4).map(|k| math::stddev(&column(k))).collect(),
        rouge_l: math::mean(&rouges),
        rouge_l_stddev: math::stddev(&rouges),
        runs,
        per_sample,
    })
}
