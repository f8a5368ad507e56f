//! Run configuration: a single flat TOML table covering the model
//! architecture, the optimizer, the data split, and the synthetic
//! generator, with `--set key=value` command-line overrides applied on top.
//!
//! The table is flat on purpose — every key can be addressed by a plain
//! name in an override, and unknown keys are hard errors so typos cannot
//! silently fall back to defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelConfig;
use crate::synth::SynthConfig;
use crate::train::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("bad override {arg:?}: {msg}")]
    BadOverride { arg: String, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    // --- architecture
    pub embed_dim: usize,
    pub protein_mlp_widths: Vec<usize>,
    pub drug_mlp_widths: Vec<usize>,
    pub gnn_layers: usize,
    pub head_layers: usize,
    pub hyper_nodes: i64,
    pub dropout_rate: f64,
    pub use_protein_kmer: bool,
    pub use_protein_cnn: bool,
    pub use_drug_fp: bool,
    pub use_drug_cnn: bool,
    pub token_embed_dim: usize,
    pub protein_conv_kernel: usize,
    pub drug_conv_kernel: usize,
    pub protein_max_len: usize,
    pub drug_max_len: usize,
    pub fingerprint_bits: usize,
    pub fingerprint_radius: u32,

    // --- optimizer
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub l2_lambda: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// absent = train to max_epochs
    pub patience: Option<usize>,
    pub deterministic: bool,
    pub threshold: f64,

    // --- split
    pub train_fraction: f64,
    pub valid_fraction: f64,
    pub test_fraction: f64,
    pub unseen_fraction: f64,

    // --- synthetic generator
    pub synth_records: usize,
    pub synth_proteins: usize,
    pub synth_drugs: usize,
    pub synth_min_len: usize,
    pub synth_max_len: usize,
    pub synth_motif: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        let t = TrainConfig::default();
        let s = SynthConfig::default();
        RunConfig {
            embed_dim: m.embed_dim,
            protein_mlp_widths: m.protein_mlp_widths,
            drug_mlp_widths: m.drug_mlp_widths,
            gnn_layers: m.gnn_layers,
            head_layers: m.head_layers,
            hyper_nodes: m.hyper_nodes,
            dropout_rate: m.dropout_rate,
            use_protein_kmer: m.use_protein_kmer,
            use_protein_cnn: m.use_protein_cnn,
            use_drug_fp: m.use_drug_fp,
            use_drug_cnn: m.use_drug_cnn,
            token_embed_dim: m.token_embed_dim,
            protein_conv_kernel: m.protein_conv_kernel,
            drug_conv_kernel: m.drug_conv_kernel,
            protein_max_len: m.protein_max_len,
            drug_max_len: m.drug_max_len,
            fingerprint_bits: m.fingerprint_bits,
            fingerprint_radius: m.fingerprint_radius,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            l2_lambda: t.l2_lambda,
            beta1: t.beta1,
            beta2: t.beta2,
            adam_eps: t.adam_eps,
            seed: t.seed,
            patience: t.patience,
            deterministic: t.deterministic,
            threshold: t.threshold,
            train_fraction: 0.7,
            valid_fraction: 0.15,
            test_fraction: 0.15,
            unseen_fraction: 0.2,
            synth_records: s.n_records,
            synth_proteins: s.n_proteins,
            synth_drugs: s.n_drugs,
            synth_min_len: s.min_len,
            synth_max_len: s.max_len,
            synth_motif: s.motif,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Ok(toml::from_str(&text)?)
    }

    /// Apply `key=value` overrides. Values are parsed as TOML (so `true`,
    /// `3`, `0.5`, and `[1024, 128]` all work); values that fail to parse as
    /// TOML are taken as bare strings. Unknown keys are rejected.
    pub fn apply_overrides(self, overrides: &[String]) -> Result<Self, ConfigError> {
        if overrides.is_empty() {
            return Ok(self);
        }
        let serialized = toml::to_string(&self).expect("config serializes");
        let mut table: toml::Table = serialized.parse().expect("round-trip parses");
        for arg in overrides {
            let (key, value) = arg.split_once('=').ok_or_else(|| ConfigError::BadOverride {
                arg: arg.clone(),
                msg: "expected key=value".to_string(),
            })?;
            let key = key.trim();
            let value = value.trim();
            // `patience` is Option-typed and omitted from the serialized
            // table when unset, so allow it explicitly
            if !table.contains_key(key) && key != "patience" {
                return Err(ConfigError::BadOverride {
                    arg: arg.clone(),
                    msg: format!("unknown key {key:?}"),
                });
            }
            let parsed: toml::Value = match format!("v = {value}").parse::<toml::Table>() {
                Ok(t) => t["v"].clone(),
                Err(_) => toml::Value::String(value.to_string()),
            };
            table.insert(key.to_string(), parsed);
        }
        let merged = toml::to_string(&table).expect("merged table serializes");
        Ok(toml::from_str(&merged)?)
    }

    pub fn to_model_config(&self) -> ModelConfig {
        ModelConfig {
            embed_dim: self.embed_dim,
            protein_mlp_widths: self.protein_mlp_widths.clone(),
            drug_mlp_widths: self.drug_mlp_widths.clone(),
            gnn_layers: self.gnn_layers,
            head_layers: self.head_layers,
            hyper_nodes: self.hyper_nodes,
            dropout_rate: self.dropout_rate,
            use_protein_kmer: self.use_protein_kmer,
            use_protein_cnn: self.use_protein_cnn,
            use_drug_fp: self.use_drug_fp,
            use_drug_cnn: self.use_drug_cnn,
            token_embed_dim: self.token_embed_dim,
            protein_conv_kernel: self.protein_conv_kernel,
            drug_conv_kernel: self.drug_conv_kernel,
            protein_max_len: self.protein_max_len,
            drug_max_len: self.drug_max_len,
            fingerprint_bits: self.fingerprint_bits,
            fingerprint_radius: self.fingerprint_radius,
            ..ModelConfig::default()
        }
    }

    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            l2_lambda: self.l2_lambda,
            beta1: self.beta1,
            beta2: self.beta2,
            adam_eps: self.adam_eps,
            seed: self.seed,
            patience: self.patience,
            deterministic: self.deterministic,
            threshold: self.threshold,
        }
    }

    pub fn to_synth_config(&self) -> SynthConfig {
        SynthConfig {
            n_records: self.synth_records,
            n_proteins: self.synth_proteins,
            n_drugs: self.synth_drugs,
            min_len: self.synth_min_len,
            max_len: self.synth_max_len,
            motif: self.synth_motif.clone(),
            seed: self.seed,
        }
    }

    pub fn fractions(&self) -> (f64, f64, f64) {
        (self.train_fraction, self.valid_fraction, self.test_fraction)
    }
}
