//! Model hyperparameters and their validity rules.

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Sizes and switches for the pair-interaction network.
///
/// `hyper_nodes` counts the learnable bridge vectors in each pair graph:
/// positive means that many extra nodes alongside the protein/drug pair,
/// `0` means the graph holds only the pair itself, and `-1` skips the graph
/// stage entirely (embeddings feed the head directly).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// dimension of the fused protein/drug embeddings and of every graph node
    pub embed_dim: usize,
    /// hidden widths of the k-mer branch; the last entry must equal `embed_dim`
    pub protein_mlp_widths: Vec<usize>,
    /// hidden widths of the fingerprint branch; last entry = `embed_dim`
    pub drug_mlp_widths: Vec<usize>,
    pub gnn_layers: usize,
    /// feed-forward depth of the interaction head (final projection included)
    pub head_layers: usize,
    pub hyper_nodes: i64,
    pub dropout_rate: f64,
    pub use_protein_kmer: bool,
    pub use_protein_cnn: bool,
    pub use_drug_fp: bool,
    pub use_drug_cnn: bool,
    /// width of the token embeddings feeding the convolutional branches
    pub token_embed_dim: usize,
    /// odd kernel width of the protein sequence convolution
    pub protein_conv_kernel: usize,
    /// odd kernel width of the SMILES convolution
    pub drug_conv_kernel: usize,
    /// fixed token length sequences are padded/truncated to
    pub protein_max_len: usize,
    pub drug_max_len: usize,
    pub protein_vocab_size: usize,
    pub smiles_vocab_size: usize,
    /// length of the k-mer count vector (1-, 2- and 3-mer blocks)
    pub kmer_dim: usize,
    pub fingerprint_bits: usize,
    pub fingerprint_radius: u32,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 128,
            protein_mlp_widths: vec![1024, 128],
            drug_mlp_widths: vec![1024, 256, 128],
            gnn_layers: 3,
            head_layers: 2,
            hyper_nodes: 64,
            dropout_rate: 0.5,
            use_protein_kmer: true,
            use_protein_cnn: true,
            use_drug_fp: true,
            use_drug_cnn: true,
            token_embed_dim: 64,
            protein_conv_kernel: 7,
            drug_conv_kernel: 5,
            protein_max_len: 1000,
            drug_max_len: 150,
            protein_vocab_size: crate::tokens::protein_vocabulary().size(),
            smiles_vocab_size: crate::tokens::smiles_vocabulary().size(),
            kmer_dim: crate::protein::KMER_DIM,
            fingerprint_bits: 1024,
            fingerprint_radius: 2,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::Config(msg));
        if self.embed_dim == 0 {
            return bad("embed_dim must be positive".into());
        }
        if self.hyper_nodes < -1 {
            return bad(format!("hyper_nodes must be >= -1, got {}", self.hyper_nodes));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate must be in [0, 1), got {}", self.dropout_rate));
        }
        if !self.use_protein_kmer && !self.use_protein_cnn {
            return bad("at least one protein branch must be enabled".into());
        }
        if !self.use_drug_fp && !self.use_drug_cnn {
            return bad("at least one drug branch must be enabled".into());
        }
        if self.use_protein_kmer {
            if self.kmer_dim == 0 {
                return bad("kmer_dim must be positive".into());
            }
            match self.protein_mlp_widths.last() {
                None => return bad("protein_mlp_widths must not be empty".into()),
                Some(&w) if w != self.embed_dim => {
                    return bad(format!(
                        "protein branch must end at embed_dim: last width {w} != {}",
                        self.embed_dim
                    ));
                }
                _ => {}
            }
        }
        if self.use_drug_fp {
            if self.fingerprint_bits == 0 {
                return bad("fingerprint_bits must be positive".into());
            }
            match self.drug_mlp_widths.last() {
                None => return bad("drug_mlp_widths must not be empty".into()),
                Some(&w) if w != self.embed_dim => {
                    return bad(format!(
                        "drug branch must end at embed_dim: last width {w} != {}",
                        self.embed_dim
                    ));
                }
                _ => {}
            }
        }
        for (name, enabled, kernel, max_len, vocab) in [
            (
                "protein",
                self.use_protein_cnn,
                self.protein_conv_kernel,
                self.protein_max_len,
                self.protein_vocab_size,
            ),
            (
                "drug",
                self.use_drug_cnn,
                self.drug_conv_kernel,
                self.drug_max_len,
                self.smiles_vocab_size,
            ),
        ] {
            if !enabled {
                continue;
            }
            if kernel % 2 == 0 || kernel == 0 {
                return bad(format!("{name} conv kernel must be odd, got {kernel}"));
            }
            if max_len == 0 {
                return bad(format!("{name} max length must be positive"));
            }
            if vocab < 2 {
                return bad(format!("{name} vocabulary needs pad + unknown entries at least"));
            }
            if self.token_embed_dim == 0 {
                return bad("token_embed_dim must be positive".into());
            }
        }
        if self.hyper_nodes >= 0 && self.gnn_layers == 0 {
            return bad("gnn_layers must be positive when the graph stage is active".into());
        }
        if self.head_layers == 0 {
            return bad("head_layers must be positive".into());
        }
        Ok(())
    }

    /// true when the pair-graph stage is skipped (`hyper_nodes == -1`)
    pub fn graph_bypassed(&self) -> bool {
        self.hyper_nodes == -1
    }
}
