//! JSON forms of evaluation reports, generations and training histories.

use cqg_core::eval::{EvalReport, Generation, RunScores, SampleResult};
use cqg_core::kg::QueryGraph;
use cqg_core::text::Token;
use cqg_core::training::{EpochStats, TrainReport};
use serde::{Deserialize, Serialize};

fn pct(x: f64) -> f64 {
    100.0 * x
}

fn pcts(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| pct(x)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StddevJson {
    pub bleu: Vec<f64>,
    pub rouge_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunJson {
    pub seed: u64,
    pub bleu: Vec<f64>,
    pub rouge_l: f64,
    pub scored: usize,
    pub skipped: usize,
}

impl From<&RunScores> for RunJson {
    fn from(r: &RunScores) -> Self {
        RunJson {
            seed: r.seed,
            bleu: pcts(&r.bleu),
            rouge_l: pct(r.rouge_l),
            scored: r.scored,
            skipped: r.skipped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleJson {
    pub sample_id: usize,
    pub generated: Vec<String>,
    pub references: Vec<Vec<String>>,
    /// Simple-corpus ids of the sub-questions used; `null` for a paired one.
    pub subquestion_ids: Vec<Option<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores_a_m: Option<Vec<f64>>,
    pub rouge_l: f64,
}

impl From<&SampleResult> for SampleJson {
    fn from(s: &SampleResult) -> Self {
        SampleJson {
            sample_id: s.index,
            generated: s.generated.clone(),
            references: s.references.clone(),
            subquestion_ids: s.sources.clone(),
            scores_a_m: s.question_weights.clone(),
            rouge_l: pct(s.rouge_l),
        }
    }
}

/// `report.json`. Scores are percentages; `bleu` holds BLEU-1..4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub bleu: Vec<f64>,
    pub rouge_l: f64,
    pub stddev: StddevJson,
    pub subq: String,
    pub runs: Vec<RunJson>,
    /// Per-sample results of the first run.
    pub per_sample: Vec<SampleJson>,
}

impl ReportJson {
    pub fn new(r: &EvalReport, subq: &str) -> Self {
        ReportJson {
            bleu: pcts(&r.bleu),
            rouge_l: pct(r.rouge_l),
            stddev: StddevJson {
                bleu: pcts(&r.bleu_stddev),
                rouge_l: pct(r.rouge_l_stddev),
            },
            subq: subq.into(),
            runs: r.runs.iter().map(RunJson::from).collect(),
            per_sample: r.per_sample.iter().map(SampleJson::from).collect(),
        }
    }
}

/// One line of a generations file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationJson {
    pub sample_id: usize,
    pub generated: Vec<String>,
    pub used_subquestions: Vec<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores_a_m: Option<Vec<f64>>,
    pub log_prob: f64,
}

/// Replaces `PHk` by the grounded entity name of triple `k`.
pub fn surface_form(tokens: &[Token], graph: &QueryGraph) -> Vec<String> {
    tokens
        .iter()
        .map(|t| match t {
            Token::Placeholder(Some(k)) => graph
                .triples
                .get(*k)
                .and_then(|tr| tr.grounded.as_ref())
                .map(|gr| gr.name.to_lowercase())
                .unwrap_or_else(|| t.surface()),
            _ => t.surface(),
        })
        .collect()
}

impl GenerationJson {
    pub fn new(g: &Generation, used: Vec<Vec<String>>, graph: Option<&QueryGraph>) -> Self {
        GenerationJson {
            sample_id: g.index,
            generated: match graph {
                Some(graph) => surface_form(&g.tokens, graph),
                None => g.tokens.iter().map(Token::surface).collect(),
            },
            used_subquestions: used,
            scores_a_m: g.question_weights.clone(),
            log_prob: g.log_prob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochJson {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_nll: f64,
    pub dev_loss: f64,
    pub lr: f64,
    pub improved: bool,
}

impl From<&EpochStats> for EpochJson {
    fn from(e: &EpochStats) -> Self {
        EpochJson {
            epoch: e.epoch,
            train_loss: e.train_loss,
            train_nll: e.train_nll,
            dev_loss: e.dev_loss,
            lr: e.lr,
            improved: e.improved,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReportJson {
    pub best_epoch: usize,
    pub best_dev_loss: f64,
    pub best_checkpoint: String,
    pub stopped_early: bool,
    pub skipped: usize,
    pub epochs: Vec<EpochJson>,
}

impl TrainReportJson {
    pub fn new(r: &TrainReport, checkpoint: &str) -> Self {
        TrainReportJson {
            best_epoch: r.best_epoch,
            best_dev_loss: r.best_dev_loss,
            best_checkpoint: checkpoint.into(),
            stopped_early: r.stopped_early,
            skipped: r.skipped,
            epochs: r.epochs.iter().map(EpochJson::from).collect(),
        }
    }
}
