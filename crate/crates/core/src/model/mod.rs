//! The CoG2Q family: Tree-LSTM graph encoder, attentive LSTM decoder with
//! coverage and placeholders, and the sub-question extensions.

mod decode;
mod decoder;
mod encoder;
mod subq;

pub use decode::{beam, greedy, sequence_log_prob, Decoded};
pub use decoder::{Context, State, StepOut, SubqHead};
pub use encoder::RelationFeatures;
pub use subq::SubqContext;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kg::QueryGraph;
use crate::tensor::{Graph, Init, ParamId, ParameterStore, Var};
use crate::text::Token;
use crate::vocab::{FeatureTables, ROLE_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Cog2q,
    Cogsub2q,
    Cogsubm2q,
    /// Bag-of-relations baseline: mean relation encoding initializes the decoder.
    EncDec,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Cog2q, Variant::Cogsub2q, Variant::Cogsubm2q, Variant::EncDec];

    pub fn uses_subquestions(self) -> bool {
        matches!(self, Variant::Cogsub2q | Variant::Cogsubm2q)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Cog2q => "cog2q",
            Variant::Cogsub2q => "cogsub2q",
            Variant::Cogsubm2q => "cogsubm2q",
            Variant::EncDec => "encdec",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Variant::ALL.into_iter().find(|v| v.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Ablation {
    pub no_attention: bool,
    pub no_inverse_predicate: bool,
    pub no_names: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelConfig {
    pub variant: Variant,
    pub ablation: Ablation,
    pub embed_dim: usize,
    pub name_dim: usize,
    pub relation_dim: usize,
    pub tree_dim: usize,
    pub dec_dim: usize,
    pub subq_dim: usize,
    /// Hidden width of every attention scorer.
    pub attn_dim: usize,
    /// Number of pseudo sub-questions fed to the multi-question variant.
    pub m: usize,
    pub max_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::Cog2q,
            ablation: Ablation::default(),
            embed_dim: 300,
            name_dim: 500,
            relation_dim: 500,
            tree_dim: 500,
            dec_dim: 500,
            subq_dim: 300,
            attn_dim: 500,
            m: 5,
            max_len: 40,
        }
    }
}

impl ModelConfig {
    /// Small dimensions for tests and quick experiments.
    pub fn tiny(variant: Variant) -> Self {
        ModelConfig {
            variant,
            embed_dim: 4,
            name_dim: 4,
            relation_dim: 5,
            tree_dim: 5,
            dec_dim: 5,
            subq_dim: 4,
            attn_dim: 4,
            m: 2,
            max_len: 12,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.embed_dim,
            self.name_dim,
            self.relation_dim,
            self.tree_dim,
            self.dec_dim,
            self.subq_dim,
            self.attn_dim,
        ];
        if dims.contains(&0) || self.m == 0 || self.max_len == 0 {
            return Err(Error::Config("dimensions, m and max_len must be positive".into()));
        }
        if self.variant == Variant::EncDec {
            if self.relation_dim != self.dec_dim {
                return Err(Error::Config(format!(
                    "encdec needs relation_dim == dec_dim, got {} and {}",
                    self.relation_dim, self.dec_dim
                )));
            }
        } else if self.tree_dim != self.dec_dim {
            return Err(Error::Config(format!(
                "decoder starts from the tree root: tree_dim {} != dec_dim {}",
                self.tree_dim, self.dec_dim
            )));
        }
        Ok(())
    }

    /// Width of the relation feature vector fed to the relation encoder.
    pub fn feature_width(&self) -> usize {
        let embeddings = if self.ablation.no_inverse_predicate { 5 } else { 6 };
        embeddings * self.embed_dim + if self.ablation.no_names { 0 } else { self.name_dim }
    }
}

/// An affine map `W x + b`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Affine {
    pub w: ParamId,
    pub b: ParamId,
}

impl Affine {
    fn create(store: &mut ParameterStore, name: &str, out: usize, inp: usize) -> Result<Self> {
        Ok(Affine {
            w: store.create(&format!("{name}.W"), &[out, inp], Init::Xavier)?,
            b: store.create(&format!("{name}.b"), &[out], Init::Zeros)?,
        })
    }

    pub fn apply(&self, g: &mut Graph<'_>, x: Var) -> Result<Var> {
        let (w, b) = (g.param(self.w), g.param(self.b));
        g.affine(w, x, b)
    }
}

/// LSTM cell with separate input, forget, output and update transforms of `[x, h]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Lstm {
    i: Affine,
    f: Affine,
    o: Affine,
    u: Affine,
    pub hidden: usize,
}

impl Lstm {
    fn create(store: &mut ParameterStore, name: &str, input: usize, hidden: usize) -> Result<Self> {
        let mut gate = |g: &str| Affine::create(store, &format!("{name}.{g}"), hidden, input + hidden);
        Ok(Lstm {
            i: gate("i")?,
            f: gate("f")?,
            o: gate("o")?,
            u: gate("u")?,
            hidden,
        })
    }

    /// `c' = i⊙u + f⊙c`, `h' = o⊙tanh(c')`, gates reading `[x, h]`.
    pub fn step(&self, g: &mut Graph<'_>, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let xh = g.concat(&[x, h])?;
        let i = self.i.apply(g, xh)?;
        let i = g.sigmoid(i);
        let f = self.f.apply(g, xh)?;
        let f = g.sigmoid(f);
        let o = self.o.apply(g, xh)?;
        let o = g.sigmoid(o);
        let u = self.u.apply(g, xh)?;
        let u = g.tanh(u);
        let iu = g.hadamard(i, u)?;
        let fc = g.hadamard(f, c)?;
        let c2 = g.add(iu, fc)?;
        let tc = g.tanh(c2);
        let h2 = g.hadamard(o, tc)?;
        Ok((h2, c2))
    }
}

/// Additive attention `w · tanh(W_q q + W_k k_j [+ w_c c_j] + b)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Attention {
    wq: ParamId,
    wk: ParamId,
    wc: Option<ParamId>,
    b: ParamId,
    w: ParamId,
}

impl Attention {
    fn create(
        store: &mut ParameterStore,
        name: &str,
        query: usize,
        key: usize,
        hidden: usize,
        coverage: bool,
    ) -> Result<Self> {
        Ok(Attention {
            wq: store.create(&format!("{name}.Wq"), &[hidden, query], Init::Xavier)?,
            wk: store.create(&format!("{name}.Wk"), &[hidden, key], Init::Xavier)?,
            wc: if coverage {
                Some(store.create(&format!("{name}.wc"), &[hidden], Init::Xavier)?)
            } else {
                None
            },
            b: store.create(&format!("{name}.b"), &[hidden], Init::Zeros)?,
            w: store.create(&format!("{name}.w"), &[1, hidden], Init::Xavier)?,
        })
    }

    /// `W_k k + b`, computed once per key.
    pub fn project_key(&self, g: &mut Graph<'_>, key: Var) -> Result<Var> {
        let (wk, b) = (g.param(self.wk), g.param(self.b));
        g.affine(wk, key, b)
    }

    /// One logit per projected key; `coverage` is a vector with one entry per key.
    pub fn logits(&self, g: &mut Graph<'_>, query: Var, keys: &[Var], coverage: Option<Var>) -> Result<Var> {
        let wq = g.param(self.wq);
        let q = g.matmul(wq, query)?;
        let w = g.param(self.w);
        let wc = self.wc.map(|p| g.param(p));
        let mut out = Vec::with_capacity(keys.len());
        for (j, &k) in keys.iter().enumerate() {
            let mut pre = g.add(q, k)?;
            if let (Some(wc), Some(cov)) = (wc, coverage) {
                let cj = g.gather(cov, &[j])?;
                let term = g.scalar_mul(cj, wc)?;
                pre = g.add(pre, term)?;
            }
            let t = g.tanh(pre);
            out.push(g.matmul(w, t)?);
        }
        g.concat(&out)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SubqParams {
    pub lstm: Lstm,
    pub attn: Attention,
    /// Copy switch over `[x, h, h_q*]`.
    pub copy: Affine,
    /// Placeholder switch over `[x, h, r*, h_q*]`.
    pub ph: Affine,
    /// Vocabulary logits over `[h, r*, h_q*]`.
    pub vocab: Affine,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Params {
    pub word: ParamId,
    pub entity_type: ParamId,
    pub role: ParamId,
    pub predicate: ParamId,
    pub name: Option<Lstm>,
    pub relation: Affine,
    pub tree: Option<(Lstm, ParamId)>,
    pub dec: Lstm,
    pub attn: Option<Attention>,
    /// Placeholder scorer used when attention is ablated.
    pub ph_attn: Option<Attention>,
    /// Vocabulary logits over `[h, r*]`.
    pub vocab: Option<Affine>,
    /// Placeholder switch over `[x, h, r*]`.
    pub ph: Option<Affine>,
    pub subq: Option<SubqParams>,
    /// Word-level and question-level scorers of the multi-question variant.
    pub score: Option<(ParamId, ParamId)>,
}

/// Model input: a query graph and zero or more sub-questions.
#[derive(Debug, Clone, Copy)]
pub struct Input<'a> {
    pub graph: &'a QueryGraph,
    pub subquestions: &'a [&'a [Token]],
}

impl<'a> Input<'a> {
    pub fn graph_only(graph: &'a QueryGraph) -> Self {
        Input {
            graph,
            subquestions: &[],
        }
    }
}

/// A model: configuration, symbol tables and parameters.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub tables: FeatureTables,
    pub store: ParameterStore,
    pub(crate) params: Params,
}

impl Model {
    pub fn new(config: ModelConfig, tables: FeatureTables, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut s = ParameterStore::new(seed);
        let c = &config;
        let (e, v) = (c.embed_dim, tables.words.len());
        let word = s.create("emb.word", &[v, e], Init::Xavier)?;
        let entity_type = s.create("emb.type", &[tables.entity_types.len(), e], Init::Xavier)?;
        let role = s.create("emb.role", &[ROLE_COUNT, e], Init::Xavier)?;
        let predicate = s.create("emb.pred", &[tables.predicates.len(), e], Init::Xavier)?;
        let name = if c.ablation.no_names {
            None
        } else {
            Some(Lstm::create(&mut s, "name", e, c.name_dim)?)
        };
        let relation = Affine::create(&mut s, "relation", c.relation_dim, c.feature_width())?;
        let tree = if c.variant == Variant::EncDec {
            None
        } else {
            let cell = Lstm::create(&mut s, "tree", c.relation_dim, c.tree_dim)?;
            let dummy = s.create("tree.dummy", &[c.relation_dim], Init::Xavier)?;
            Some((cell, dummy))
        };
        let dec = Lstm::create(&mut s, "dec", e, c.dec_dim)?;
        let (attn, ph_attn) = if c.ablation.no_attention {
            let a = Attention::create(&mut s, "dec.phattn", c.dec_dim, c.relation_dim, c.attn_dim, false)?;
            (None, Some(a))
        } else {
            let a = Attention::create(&mut s, "dec.attn", c.dec_dim, c.relation_dim, c.attn_dim, true)?;
            (Some(a), None)
        };
        let (r, d, sq) = (c.relation_dim, c.dec_dim, c.subq_dim);
        let (vocab, ph, subq) = if c.variant.uses_subquestions() {
            let lstm = Lstm::create(&mut s, "subq", e, sq)?;
            let attn = Attention::create(&mut s, "subq.attn", d, sq, c.attn_dim, false)?;
            let copy = Affine::create(&mut s, "subq.copy", 1, e + d + sq)?;
            let ph = Affine::create(&mut s, "subq.ph", 1, e + d + r + sq)?;
            let vocab = Affine::create(&mut s, "subq.vocab", v, d + r + sq)?;
            (
                None,
                None,
                Some(SubqParams {
                    lstm,
                    attn,
                    copy,
                    ph,
                    vocab,
                }),
            )
        } else {
            (
                Some(Affine::create(&mut s, "dec.vocab", v, d + r)?),
                Some(Affine::create(&mut s, "dec.ph", 1, e + d + r)?),
                None,
            )
        };
        let score = if c.variant == Variant::Cogsubm2q {
            Some((
                s.create("score.word.W", &[1, sq + c.tree_dim], Init::Xavier)?,
                s.create("score.question.W", &[1, sq + c.tree_dim], Init::Xavier)?,
            ))
        } else {
            None
        };
        Ok(Model {
            config,
            tables,
            store: s,
            params: Params {
                word,
                entity_type,
                role,
                predicate,
                name,
                relation,
                tree,
                dec,
                attn,
                ph_attn,
                vocab,
                ph,
                subq,
                score,
            },
        })
    }

    /// Vocabulary size `V`; output ids `>= V` are placeholders.
    pub fn vocab_size(&self) -> usize {
        self.tables.words.len()
    }

    /// Copies parameters with matching names and shapes from `other`
    /// (e.g. a trained CoG2Q model) and returns how many were copied.
    pub fn init_from(&mut self, other: &Model) -> Result<usize> {
        if other.tables != self.tables {
            return Err(Error::Config("models use different symbol tables".into()));
        }
        Ok(self.store.copy_matching(&other.store))
    }

    /// Names of the parameters this model owns.
    pub fn parameter_names(&self) -> Vec<String> {
        self.store.iter().map(|p| p.name().into()).collect()
    }
}
