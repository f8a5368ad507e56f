//! The pair-interaction network.
//!
//! A protein is embedded by a k-mer MLP plus a sequence CNN, a drug by a
//! fingerprint MLP plus a SMILES CNN (either branch of each side can be
//! toggled off). Every protein–drug pair then forms a small graph together
//! with a bank of learnable bridge nodes shared across pairs: edges are
//! cosine similarities with negative values filtered out, symmetrically
//! degree-normalized, and a residual graph network propagates node states.
//! The element-wise product of the propagated pair rows passes through a
//! feed-forward head to a single sigmoid probability. Setting
//! `hyper_nodes = -1` bypasses the graph stage so the raw embeddings feed
//! the head directly.

mod config;
mod net;
mod params;

pub use config::ModelConfig;
pub use net::{forward_batch, forward_with, Mode, PairInput};
pub use params::ModelParams;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("{what} for pair {index} has length {got}, expected {expected}")]
    InputLength {
        what: &'static str,
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("parameter tensor {0} does not exist")]
    MissingParam(String),
    #[error(transparent)]
    Ad(#[from] crate::autodiff::AdError),
}
