//! The forward pass: feature branches fuse into one embedding per protein
//! and one per drug, each pair gets its own small graph bridged by the
//! shared learnable nodes, and the element-wise product of the propagated
//! pair feeds a feed-forward head ending in a sigmoid.

use std::cell::RefCell;
use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::autodiff::ops;
use crate::autodiff::{Tape, Tensor, Values};

use super::{ModelError, ModelParams};

/// Forward-pass behavior switch.
///
/// `Train` uses batch statistics for normalization and applies dropout when
/// a mask seed is given; `Train { dropout_seed: None }` is the deterministic
/// training path used by gradient checks. `Inference` uses running
/// statistics and never drops anything.
#[derive(Debug, Clone)]
pub enum Mode {
    Train { dropout_seed: Option<u64> },
    Inference,
}

/// One drug–protein pair, fully featurized and padded to the lengths the
/// configuration fixes.
///
/// Feature vectors sit behind `Arc` so the many records that share one
/// protein (or one drug) share a single featurization, and batch assembly
/// is a reference-count bump rather than a copy.
#[derive(Debug, Clone, PartialEq)]
pub struct PairInput {
    /// standardized k-mer counts, `kmer_dim` long
    pub kmer: std::sync::Arc<Vec<f64>>,
    /// protein token ids padded/truncated to `protein_max_len`
    pub protein_tokens: std::sync::Arc<Vec<usize>>,
    /// fingerprint bits as 0/1 reals, `fingerprint_bits` long
    pub fp: std::sync::Arc<Vec<f64>>,
    /// SMILES token ids padded/truncated to `drug_max_len`
    pub drug_tokens: std::sync::Arc<Vec<usize>>,
}

struct Ctx<'a> {
    params: &'a ModelParams,
    tensors: &'a BTreeMap<String, Tensor>,
    mode: &'a Mode,
    dropout_rng: RefCell<Option<ChaCha12Rng>>,
}

impl<'a> Ctx<'a> {
    fn get(&self, name: &str) -> Result<&'a Tensor, ModelError> {
        self.tensors
            .get(name)
            .ok_or_else(|| ModelError::MissingParam(name.to_string()))
    }

    /// affine -> batchnorm -> relu -> dropout, the block every MLP and head
    /// hidden layer is made of
    fn dense_block(&self, x: &Tensor, prefix: &str) -> Result<Tensor, ModelError> {
        let x = ops::matmul(x, self.get(&format!("{prefix}.weight"))?)?;
        let x = ops::add_bias(&x, self.get(&format!("{prefix}.bias"))?)?;
        let x = self.batchnorm(&x, prefix)?;
        let x = ops::relu(&x)?;
        self.dropout(&x)
    }

    fn batchnorm(&self, x: &Tensor, layer: &str) -> Result<Tensor, ModelError> {
        let gamma = self.get(&format!("{layer}.bn_gamma"))?;
        let beta = self.get(&format!("{layer}.bn_beta"))?;
        match self.mode {
            Mode::Train { .. } => {
                let (out, stats) = ops::batchnorm_train(x, gamma, beta)?;
                self.params.update_running(layer, &stats.mean, &stats.var);
                Ok(out)
            }
            Mode::Inference => {
                let (mean, var) = self
                    .params
                    .running_pair(layer)
                    .ok_or_else(|| ModelError::MissingParam(format!("{layer}.bn_mean")))?;
                Ok(ops::batchnorm_infer(x, gamma, beta, &mean, &var)?)
            }
        }
    }

    fn dropout(&self, x: &Tensor) -> Result<Tensor, ModelError> {
        let rate = self.params.config().dropout_rate;
        let mut slot = self.dropout_rng.borrow_mut();
        match slot.as_mut() {
            Some(rng) if rate > 0.0 => Ok(ops::dropout(x, rate, rng)?),
            _ => Ok(x.clone()),
        }
    }

    /// token embedding -> same-padded conv -> relu -> max over positions
    fn cnn_branch(&self, ids: &[usize], bsz: usize, len: usize, prefix: &str) -> Result<Tensor, ModelError> {
        let cfg = self.params.config();
        let ted = cfg.token_embed_dim;
        let d = cfg.embed_dim;
        let e = ops::embedding(self.get(&format!("{prefix}.embed"))?, ids)?;
        let e = ops::reshape(&e, vec![bsz, len, ted])?;
        let c = ops::conv1d(&e, self.get(&format!("{prefix}.kernel"))?)?;
        let c = ops::reshape(&c, vec![bsz * len, d])?;
        let c = ops::add_bias(&c, self.get(&format!("{prefix}.bias"))?)?;
        let c = ops::relu(&c)?;
        let c = ops::reshape(&c, vec![bsz, len, d])?;
        Ok(ops::global_maxpool(&c)?)
    }
}

fn stack_reals(
    batch: &[PairInput],
    field: impl Fn(&PairInput) -> &[f64],
    expected: usize,
    what: &'static str,
) -> Result<Values, ModelError> {
    let mut data = Vec::with_capacity(batch.len() * expected);
    for (index, pair) in batch.iter().enumerate() {
        let row = field(pair);
        if row.len() != expected {
            return Err(ModelError::InputLength { what, index, got: row.len(), expected });
        }
        data.extend_from_slice(row);
    }
    Ok(Values::matrix(batch.len(), expected, data))
}

fn flatten_tokens(
    batch: &[PairInput],
    field: impl Fn(&PairInput) -> &[usize],
    expected: usize,
    vocab: usize,
    what: &'static str,
) -> Result<Vec<usize>, ModelError> {
    let mut ids = Vec::with_capacity(batch.len() * expected);
    for (index, pair) in batch.iter().enumerate() {
        let row = field(pair);
        if row.len() != expected {
            return Err(ModelError::InputLength { what, index, got: row.len(), expected });
        }
        if let Some(&bad) = row.iter().find(|&&id| id >= vocab) {
            return Err(ModelError::Config(format!(
                "{what} for pair {index} holds token id {bad}, vocabulary size {vocab}"
            )));
        }
        ids.extend_from_slice(row);
    }
    Ok(ids)
}

/// Run the model over a batch. With a tape, the returned probabilities are
/// differentiable with respect to every parameter tensor; without one this
/// is plain inference. Output shape: `[batch]`, entries strictly in (0, 1).
pub fn forward_batch(
    params: &ModelParams,
    tape: Option<&Tape>,
    batch: &[PairInput],
    mode: &Mode,
) -> Result<Tensor, ModelError> {
    let tensors = match tape {
        Some(t) => params.leaf_map(t),
        None => params.constant_map(),
    };
    forward_with(params, &tensors, batch, mode)
}

/// Forward pass over externally resolved parameter tensors. Gradient
/// checking uses this to substitute perturbed leaves; `forward_batch` is
/// the everyday entry point.
pub fn forward_with(
    params: &ModelParams,
    tensors: &BTreeMap<String, Tensor>,
    batch: &[PairInput],
    mode: &Mode,
) -> Result<Tensor, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let cfg = params.config();
    cfg.validate()?;
    let bsz = batch.len();

    let dropout_rng = match mode {
        Mode::Train { dropout_seed: Some(seed) } if cfg.dropout_rate > 0.0 => {
            Some(ChaCha12Rng::seed_from_u64(*seed))
        }
        _ => None,
    };
    let ctx = Ctx { params, tensors, mode, dropout_rng: RefCell::new(dropout_rng) };

    // protein embedding u: k-mer MLP + sequence CNN, disabled branches
    // contribute nothing
    let mut u: Option<Tensor> = None;
    if cfg.use_protein_kmer {
        let kmer = stack_reals(batch, |p| p.kmer.as_slice(), cfg.kmer_dim, "kmer vector")?;
        let mut x = Tensor::constant(kmer);
        for i in 0..cfg.protein_mlp_widths.len() {
            x = ctx.dense_block(&x, &format!("protein_mlp.{i}"))?;
        }
        u = Some(x);
    }
    if cfg.use_protein_cnn {
        let ids = flatten_tokens(
            batch,
            |p| p.protein_tokens.as_slice(),
            cfg.protein_max_len,
            cfg.protein_vocab_size,
            "protein tokens",
        )?;
        let c = ctx.cnn_branch(&ids, bsz, cfg.protein_max_len, "protein_cnn")?;
        u = Some(match u {
            Some(prev) => ops::add(&prev, &c)?,
            None => c,
        });
    }
    let u = u.expect("config validation guarantees a protein branch");

    // drug embedding v: fingerprint MLP + SMILES CNN
    let mut v: Option<Tensor> = None;
    if cfg.use_drug_fp {
        let fp = stack_reals(batch, |p| p.fp.as_slice(), cfg.fingerprint_bits, "fingerprint")?;
        let mut x = Tensor::constant(fp);
        for i in 0..cfg.drug_mlp_widths.len() {
            x = ctx.dense_block(&x, &format!("drug_mlp.{i}"))?;
        }
        v = Some(x);
    }
    if cfg.use_drug_cnn {
        let ids = flatten_tokens(
            batch,
            |p| p.drug_tokens.as_slice(),
            cfg.drug_max_len,
            cfg.smiles_vocab_size,
            "drug tokens",
        )?;
        let c = ctx.cnn_branch(&ids, bsz, cfg.drug_max_len, "drug_cnn")?;
        v = Some(match v {
            Some(prev) => ops::add(&prev, &c)?,
            None => c,
        });
    }
    let v = v.expect("config validation guarantees a drug branch");

    // pair interaction: either the graph stage or the direct bypass
    let h = if cfg.graph_bypassed() {
        ops::elementwise_mul(&u, &v)?
    } else {
        let bank = if cfg.hyper_nodes > 0 {
            Some(ctx.get("hyper_nodes")?)
        } else {
            None
        };
        let mut u_rows = Vec::with_capacity(bsz);
        let mut v_rows = Vec::with_capacity(bsz);
        for b in 0..bsz {
            let ub = ops::slice_rows(&u, b, 1)?;
            let vb = ops::slice_rows(&v, b, 1)?;
            // node order: protein, drug, then the shared bridge nodes
            let z0 = match bank {
                Some(nodes) => ops::concat_rows(&[&ub, &vb, nodes])?,
                None => ops::concat_rows(&[&ub, &vb])?,
            };
            // similarity graph with negative edges filtered, then
            // symmetrically degree-normalized
            let a = ops::cosine_similarity_matrix(&z0)?;
            let l = ops::degree_normalize(&ops::relu(&a)?)?;
            let mut z = z0;
            for i in 0..cfg.gnn_layers {
                let w = ctx.get(&format!("gnn.{i}.weight"))?;
                let bias = ctx.get(&format!("gnn.{i}.bias"))?;
                let lin = ops::add_bias(&ops::matmul(&ops::matmul(&l, &z)?, w)?, bias)?;
                // rectified propagation with a residual pass-through
                z = ops::add(&ops::relu(&lin)?, &z)?;
            }
            u_rows.push(ops::slice_rows(&z, 0, 1)?);
            v_rows.push(ops::slice_rows(&z, 1, 1)?);
        }
        let u_refs: Vec<&Tensor> = u_rows.iter().collect();
        let v_refs: Vec<&Tensor> = v_rows.iter().collect();
        let uh = ops::concat_rows(&u_refs)?;
        let vh = ops::concat_rows(&v_refs)?;
        ops::elementwise_mul(&uh, &vh)?
    };

    // interaction head: hidden blocks, then a single-logit projection
    let mut x = h;
    for i in 0..cfg.head_layers - 1 {
        x = ctx.dense_block(&x, &format!("head.{i}"))?;
    }
    let logits = ops::add_bias(
        &ops::matmul(&x, ctx.get("head.out.weight")?)?,
        ctx.get("head.out.bias")?,
    )?;
    let probs = ops::sigmoid(&logits)?;
    Ok(ops::reshape(&probs, vec![bsz])?)
}
