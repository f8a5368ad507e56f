//! Drug–protein interaction prediction with learnable bridge nodes.
//!
//! The pipeline pairs classical featurization (protein k-mer statistics,
//! molecular circular fingerprints) with learned sequence convolutions,
//! connects each protein–drug pair through a shared bank of trainable
//! hyper-nodes in a per-pair similarity graph, propagates with residual
//! graph convolutions, and scores the pair with a sigmoid head. Everything
//! from the SMILES parser to the reverse-mode gradients is implemented in
//! this crate; the only external dependencies are plumbing (CLI, config,
//! serialization, RNG).

pub mod autodiff;
pub mod chem;
pub mod cli;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod features;
pub mod metrics;
pub mod model;
pub mod protein;
pub mod synth;
pub mod tokens;
pub mod train;
