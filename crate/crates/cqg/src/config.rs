//! JSON forms of model and training configurations.

use cqg_core::model::{Ablation, ModelConfig, Variant};
use cqg_core::training::{AdamConfig, SubqMode, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Serialized [`ModelConfig`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub variant: String,
    pub embed_dim: usize,
    pub name_dim: usize,
    pub relation_dim: usize,
    pub tree_dim: usize,
    pub dec_dim: usize,
    pub subq_dim: usize,
    pub attn_dim: usize,
    pub m: usize,
    pub max_len: usize,
    pub no_attention: bool,
    pub no_inverse_predicate: bool,
    pub no_names: bool,
}

impl From<&ModelConfig> for ModelSpec {
    fn from(c: &ModelConfig) -> Self {
        ModelSpec {
            variant: c.variant.as_str().into(),
            embed_dim: c.embed_dim,
            name_dim: c.name_dim,
            relation_dim: c.relation_dim,
            tree_dim: c.tree_dim,
            dec_dim: c.dec_dim,
            subq_dim: c.subq_dim,
            attn_dim: c.attn_dim,
            m: c.m,
            max_len: c.max_len,
            no_attention: c.ablation.no_attention,
            no_inverse_predicate: c.ablation.no_inverse_predicate,
            no_names: c.ablation.no_names,
        }
    }
}

impl ModelSpec {
    pub fn to_config(&self) -> Result<ModelConfig> {
        let variant = parse_variant(&self.variant)?;
        let c = ModelConfig {
            variant,
            ablation: Ablation {
                no_attention: self.no_attention,
                no_inverse_predicate: self.no_inverse_predicate,
                no_names: self.no_names,
            },
            embed_dim: self.embed_dim,
            name_dim: self.name_dim,
            relation_dim: self.relation_dim,
            tree_dim: self.tree_dim,
            dec_dim: self.dec_dim,
            subq_dim: self.subq_dim,
            attn_dim: self.attn_dim,
            m: self.m,
            max_len: self.max_len,
        };
        c.validate()?;
        Ok(c)
    }
}

pub fn parse_variant(s: &str) -> Result<Variant> {
    Variant::parse(s).ok_or_else(|| Error::Usage(format!("unknown model {s:?}")))
}

pub fn parse_subq(s: &str) -> Result<SubqMode> {
    SubqMode::parse(s).ok_or_else(|| Error::Usage(format!("unknown sub-question mode {s:?}")))
}

/// The flat training configuration file. Missing keys take their defaults;
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainFile {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr_decay: f64,
    pub lambda_cov: f64,
    pub lambda_l2: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub full_batch: bool,
    /// Defaults to the model's own training mode.
    pub subq_mode: Option<String>,
    pub embed_dim: usize,
    pub name_dim: usize,
    pub relation_dim: usize,
    pub tree_dim: usize,
    pub dec_dim: usize,
    pub subq_dim: usize,
    pub attn_dim: usize,
    pub m: usize,
    pub max_len: usize,
    pub no_attention: bool,
    pub no_inverse_predicate: bool,
    pub no_names: bool,
}

impl Default for TrainFile {
    fn default() -> Self {
        let t = TrainConfig::default();
        let m = ModelSpec::from(&ModelConfig::default());
        TrainFile {
            lr: t.lr,
            beta1: t.adam.beta1,
            beta2: t.adam.beta2,
            eps: t.adam.eps,
            lr_decay: t.lr_decay,
            lambda_cov: t.lambda_cov,
            lambda_l2: t.lambda_l2,
            max_epochs: t.max_epochs,
            patience: t.patience,
            seed: t.seed,
            full_batch: t.full_batch,
            subq_mode: None,
            embed_dim: m.embed_dim,
            name_dim: m.name_dim,
            relation_dim: m.relation_dim,
            tree_dim: m.tree_dim,
            dec_dim: m.dec_dim,
            subq_dim: m.subq_dim,
            attn_dim: m.attn_dim,
            m: m.m,
            max_len: m.max_len,
            no_attention: m.no_attention,
            no_inverse_predicate: m.no_inverse_predicate,
            no_names: m.no_names,
        }
    }
}

impl TrainFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Usage(format!("training config: {e}")))
    }

    pub fn model_spec(&self, variant: Variant) -> ModelSpec {
        ModelSpec {
            variant: variant.as_str().into(),
            embed_dim: self.embed_dim,
            name_dim: self.name_dim,
            relation_dim: self.relation_dim,
            tree_dim: self.tree_dim,
            dec_dim: self.dec_dim,
            subq_dim: self.subq_dim,
            attn_dim: self.attn_dim,
            m: self.m,
            max_len: self.max_len,
            no_attention: self.no_attention,
            no_inverse_predicate: self.no_inverse_predicate,
            no_names: self.no_names,
        }
    }

    pub fn train_config(&self, variant: Variant) -> Result<TrainConfig> {
        let subq_mode = match &self.subq_mode {
            Some(s) => parse_subq(s)?,
            None => SubqMode::default_for(variant),
        };
        let c = TrainConfig {
            lr: self.lr,
            adam: AdamConfig {
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
            },
            lr_decay: self.lr_decay,
            lambda_cov: self.lambda_cov,
            lambda_l2: self.lambda_l2,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed: self.seed,
            full_batch: self.full_batch,
            subq_mode,
        };
        c.validate().map_err(|e| Error::Usage(e.to_string()))?;
        Ok(c)
    }
}
