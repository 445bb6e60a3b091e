//! Command-line interface: argument definitions and subcommand bodies.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use cqg_core::eval::{evaluate, generate_all, DecodeOptions, EvalOptions};
use cqg_core::model::{Model, Variant};
use cqg_core::preprocess::{build_corpus, Corpus, RawItem, Sample, SplitSpec};
use cqg_core::synth::generate_raw;
use cqg_core::text::{surfaces, Token};
use cqg_core::training::{pool_question, train, SubqMode};
use cqg_core::vocab::FeatureTables;
use serde_json::json;

use crate::checkpoint;
use crate::config::{parse_subq, parse_variant, TrainFile};
use crate::error::{Error, Result};
use crate::format::{load_raw, load_samples, read_text, save_raw, save_samples, to_jsonl, write_text};
use crate::log;
use crate::manifest::{manifest_path, ManifestBuilder};
use crate::report::{GenerationJson, ReportJson, TrainReportJson};

#[derive(Debug, Parser)]
#[command(name = "cqg", version, about = "Complex question generation from knowledge-graph query graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Substitute placeholders, group, attach pseudo pools and split a raw corpus.
    Preprocess(PreprocessArgs),
    /// Write a synthetic raw corpus and its processed splits.
    Synth(SynthArgs),
    /// Train a model on a processed corpus.
    Train(TrainArgs),
    /// Decode questions for a split.
    Generate(GenerateArgs),
    /// Score a checkpoint on a split over repeated runs.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Raw questions; single-triple graphs form the simple corpus unless --simple is given.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Separate raw simple-question file.
    #[arg(long)]
    pub simple: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 13)]
    pub seed: u64,
    /// Train, dev and test shares.
    #[arg(long, default_value = "0.7,0.15,0.15")]
    pub ratios: String,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 11)]
    pub seed: u64,
    /// Number of complex graphs.
    #[arg(long, default_value_t = 20)]
    pub graphs: usize,
    #[arg(long, default_value_t = 12)]
    pub predicates: usize,
    /// Pseudo sub-questions written per complex graph.
    #[arg(long, default_value_t = 3)]
    pub pseudo: usize,
    #[arg(long, default_value = "0.7,0.15,0.15")]
    pub ratios: String,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub model: String,
    /// Flat JSON training configuration; defaults apply when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Corpus directory with train.jsonl, dev.jsonl and simple.jsonl.
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint whose matching parameters and symbol tables initialize the model.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed of the configuration file.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Sample file to decode.
    #[arg(long)]
    pub data: PathBuf,
    /// Simple-question corpus; defaults to simple.jsonl next to --data.
    #[arg(long)]
    pub simple: Option<PathBuf>,
    /// none, corresponding, random_pseudo or multi; defaults to the
    /// checkpoint's test-time mode.
    #[arg(long)]
    pub subq: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub beam: usize,
    /// Maximum output length; defaults to the checkpoint's.
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub decode: DecodeArgs,
    /// Replace placeholders with grounded entity names.
    #[arg(long)]
    pub surface: bool,
    /// Output JSONL; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub decode: DecodeArgs,
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess(a) => preprocess(a),
        Command::Synth(a) => synth(a),
        Command::Train(a) => train_cmd(a),
        Command::Generate(a) => generate(a),
        Command::Evaluate(a) => evaluate_cmd(a),
    }
}

fn parse_ratios(s: &str, seed: u64) -> Result<SplitSpec> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Error::Usage(format!("--ratios {s:?}: {e}")))?;
    let [train, dev, test] = parts[..] else {
        return Err(Error::Usage(format!("--ratios needs three values, got {s:?}")));
    };
    let spec = SplitSpec { train, dev, test, seed };
    spec.validate().map_err(|e| Error::Usage(e.to_string()))?;
    Ok(spec)
}

const SPLITS: [&str; 4] = ["train", "dev", "test", "simple"];

fn write_corpus(dir: &Path, c: &Corpus) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for (name, samples) in SPLITS.iter().zip([&c.train, &c.dev, &c.test, &c.simple]) {
        let p = dir.join(format!("{name}.jsonl"));
        save_samples(&p, samples)?;
        out.push(p);
    }
    Ok(out)
}

fn warn_unmatched(c: &Corpus) {
    for &(item, triple) in &c.warnings {
        log::warn(&[("event", &"unmatched_entity"), ("item", &item), ("triple", &triple)]);
    }
}

fn log_corpus(c: &Corpus) {
    log::info(&[
        ("event", &"corpus"),
        ("train", &c.train.len()),
        ("dev", &c.dev.len()),
        ("test", &c.test.len()),
        ("simple", &c.simple.len()),
    ]);
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    let spec = parse_ratios(&a.ratios, a.seed)?;
    let manifest = ManifestBuilder::start(
        "preprocess",
        a.seed,
        json!({ "ratios": [spec.train, spec.dev, spec.test], "simple": a.simple.is_some() }),
    );
    let raw = load_raw(&a.input)?;
    let mut inputs = vec![a.input.clone()];
    let (complex, simple): (Vec<RawItem>, Vec<RawItem>) = match &a.simple {
        Some(p) => {
            inputs.push(p.clone());
            (raw, load_raw(p)?)
        }
        None => raw.into_iter().partition(|r| r.graph.is_complex()),
    };
    let corpus = build_corpus(&complex, &simple, &spec)?;
    warn_unmatched(&corpus);
    let outputs = write_corpus(&a.out, &corpus)?;
    log_corpus(&corpus);
    manifest.finish(&inputs, &outputs, &manifest_path(&a.out, true))?;
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = parse_ratios(&a.ratios, a.seed)?;
    let manifest = ManifestBuilder::start(
        "synth",
        a.seed,
        json!({
            "graphs": a.graphs,
            "predicates": a.predicates,
            "pseudo": a.pseudo,
            "ratios": [spec.train, spec.dev, spec.test],
        }),
    );
    let raw = generate_raw(a.seed, a.graphs, a.predicates, a.pseudo).map_err(|e| Error::Usage(e.to_string()))?;
    let corpus = build_corpus(&raw.complex, &raw.simple, &spec)?;
    let raw_path = a.out.join("raw.jsonl");
    let all: Vec<RawItem> = raw.complex.iter().chain(&raw.simple).cloned().collect();
    save_raw(&raw_path, &all)?;
    let mut outputs = vec![raw_path];
    outputs.extend(write_corpus(&a.out, &corpus)?);
    log_corpus(&corpus);
    manifest.finish(&[], &outputs, &manifest_path(&a.out, true))?;
    Ok(())
}

/// Symbol tables covering every graph, the training targets and all
/// sub-question text a model may read.
pub fn corpus_tables(train: &[Sample], others: &[&[Sample]], simple: &[Sample]) -> FeatureTables {
    let questions: Vec<&[Token]> = train
        .iter()
        .flat_map(|s| s.references.iter().chain(s.subquestion.iter()))
        .chain(others.iter().flat_map(|o| o.iter().flat_map(|s| s.subquestion.iter())))
        .chain(simple.iter().flat_map(|s| s.references.iter()))
        .map(|q| q.as_slice())
        .collect();
    let graphs = train
        .iter()
        .chain(others.iter().flat_map(|o| o.iter()))
        .chain(simple)
        .map(|s| &s.graph);
    FeatureTables::build(graphs, questions)
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let variant = parse_variant(&a.model)?;
    let mut file = match &a.config {
        Some(p) => TrainFile::parse(&read_text(p)?)?,
        None => TrainFile::default(),
    };
    if let Some(seed) = a.seed {
        file.seed = seed;
    }
    let cfg = file.train_config(variant)?;
    let spec = file.model_spec(variant);
    let config = spec.to_config().map_err(|e| Error::Usage(e.to_string()))?;
    let manifest = ManifestBuilder::start(
        "train",
        cfg.seed,
        json!({ "model": variant.as_str(), "config": file, "init": a.init.as_ref().map(|p| p.display().to_string()) }),
    );

    let paths: Vec<PathBuf> = ["train", "dev", "simple"]
        .iter()
        .map(|n| a.data.join(format!("{n}.jsonl")))
        .collect();
    let train_set = load_samples(&paths[0])?;
    let dev_set = load_samples(&paths[1])?;
    let simple = load_samples(&paths[2])?;
    let mut inputs = paths.clone();

    let mut model = match &a.init {
        Some(p) => {
            let init = checkpoint::load(p)?;
            inputs.push(p.clone());
            let mut m = Model::new(config, init.tables.clone(), cfg.seed)?;
            let copied = m.init_from(&init)?;
            log::info(&[("event", &"init"), ("from", &p.display()), ("copied", &copied)]);
            m
        }
        None => {
            let tables = corpus_tables(&train_set, &[&dev_set], &simple);
            Model::new(config, tables, cfg.seed)?
        }
    };
    log::info(&[
        ("event", &"model"),
        ("variant", &variant.as_str()),
        ("parameters", &model.store.num_values()),
        ("vocab", &model.vocab_size()),
        ("subq", &cfg.subq_mode.as_str()),
    ]);

    let best_path = a.out.join("best.cqg");
    let report = train(&mut model, &train_set, &dev_set, &simple, &cfg, |m, stats| {
        log::info(&[
            ("event", &"best"),
            ("epoch", &stats.epoch),
            ("dev_loss", &stats.dev_loss),
        ]);
        checkpoint::save(&best_path, m).map_err(|e| cqg_core::Error::Data(e.to_string()))
    })?;
    for e in &report.epochs {
        log::info(&[
            ("event", &"epoch"),
            ("epoch", &e.epoch),
            ("train_loss", &e.train_loss),
            ("dev_loss", &e.dev_loss),
            ("lr", &e.lr),
        ]);
    }
    if report.skipped > 0 {
        log::warn(&[("event", &"skipped_samples"), ("count", &report.skipped)]);
    }
    let report_path = a.out.join("train_report.json");
    let json = serde_json::to_string_pretty(&TrainReportJson::new(&report, "best.cqg")).expect("serializable");
    write_text(&report_path, &(json + "\n"))?;
    manifest.finish(&inputs, &[best_path, report_path], &manifest_path(&a.out, true))?;
    Ok(())
}

struct Loaded {
    model: Model,
    samples: Vec<Sample>,
    simple: Vec<Sample>,
    opts: DecodeOptions,
    inputs: Vec<PathBuf>,
}

/// Sub-question mode used at test time when none is requested: pseudo
/// sub-questions only, matching what is available for unseen questions.
pub fn test_mode(v: Variant) -> SubqMode {
    match v {
        Variant::Cogsub2q => SubqMode::RandomPseudo,
        v => SubqMode::default_for(v),
    }
}

fn load_for_decoding(a: &DecodeArgs) -> Result<Loaded> {
    let model = checkpoint::load(&a.checkpoint)?;
    let variant = model.config.variant;
    let mode = match &a.subq {
        Some(s) => parse_subq(s)?,
        None => test_mode(variant),
    };
    if !mode.compatible(variant) {
        return Err(Error::Usage(format!(
            "--subq {} cannot be used with a {} checkpoint",
            mode.as_str(),
            variant.as_str()
        )));
    }
    if a.beam == 0 || a.max_len == Some(0) {
        return Err(Error::Usage("--beam and --max-len must be at least 1".into()));
    }
    let simple_path = a
        .simple
        .clone()
        .unwrap_or_else(|| a.data.with_file_name("simple.jsonl"));
    let samples = load_samples(&a.data)?;
    let mut inputs = vec![a.checkpoint.clone(), a.data.clone()];
    let simple = if variant.uses_subquestions() {
        inputs.push(simple_path.clone());
        load_samples(&simple_path)?
    } else {
        Vec::new()
    };
    let opts = DecodeOptions {
        mode,
        max_len: a.max_len.unwrap_or(model.config.max_len),
        beam: a.beam,
    };
    Ok(Loaded {
        model,
        samples,
        simple,
        opts,
        inputs,
    })
}

fn decode_config(a: &DecodeArgs, opts: &DecodeOptions) -> serde_json::Value {
    json!({ "subq": opts.mode.as_str(), "beam": opts.beam, "max_len": opts.max_len, "simple": a.simple.as_ref().map(|p| p.display().to_string()) })
}

fn generate(a: GenerateArgs) -> Result<()> {
    let l = load_for_decoding(&a.decode)?;
    let mut config = decode_config(&a.decode, &l.opts);
    config["surface"] = json!(a.surface);
    let manifest = ManifestBuilder::start("generate", a.decode.seed, config);
    let (gens, skipped) = generate_all(&l.model, &l.samples, &l.simple, &l.opts, a.decode.seed)?;
    if skipped > 0 {
        log::warn(&[("event", &"skipped_samples"), ("count", &skipped)]);
    }
    let mut lines = Vec::with_capacity(gens.len());
    for g in &gens {
        let sample = &l.samples[g.index];
        let used = g
            .sources
            .iter()
            .map(|src| match src {
                Some(id) => pool_question(&l.simple, *id).map(|q| surfaces(&q)),
                None => Ok(surfaces(sample.subquestion.as_deref().unwrap_or_default())),
            })
            .collect::<cqg_core::Result<Vec<_>>>()?;
        lines.push(GenerationJson::new(g, used, a.surface.then_some(&sample.graph)));
    }
    let text: String = lines
        .iter()
        .map(|j| serde_json::to_string(j).expect("serializable") + "\n")
        .collect();
    match &a.out {
        Some(out) => {
            write_text(out, &text)?;
            manifest.finish(&l.inputs, &[out.clone()], &manifest_path(out, false))?;
        }
        None => print!("{text}"),
    }
    log::info(&[("event", &"generated"), ("samples", &gens.len())]);
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    if a.runs == 0 {
        return Err(Error::Usage("--runs must be at least 1".into()));
    }
    let l = load_for_decoding(&a.decode)?;
    let mut config = decode_config(&a.decode, &l.opts);
    config["runs"] = json!(a.runs);
    let manifest = ManifestBuilder::start("evaluate", a.decode.seed, config);
    let opts = EvalOptions {
        decode: l.opts,
        runs: a.runs,
        seed: a.decode.seed,
    };
    let report = evaluate(&l.model, &l.samples, &l.simple, &opts)?;
    let json = ReportJson::new(&report, l.opts.mode.as_str());
    write_text(&a.out, &(serde_json::to_string_pretty(&json).expect("serializable") + "\n"))?;
    log::info(&[
        ("event", &"evaluated"),
        ("bleu4", &json.bleu[3]),
        ("rouge_l", &json.rouge_l),
        ("bleu4_stddev", &json.stddev.bleu[3]),
    ]);
    manifest.finish(&l.inputs, &[a.out.clone()], &manifest_path(&a.out, false))?;
    Ok(())
}

/// Raw-corpus JSONL text, used by tests and tools that build inputs in memory.
pub fn raw_jsonl(items: &[RawItem]) -> String {
    to_jsonl::<crate::format::RawJson, RawItem>(items)
}
