//! Training loop: cross-entropy with L2 weight regularization, Adam
//! updates, epoch-level shuffling, and validation-AUC model selection.
//!
//! Determinism contract: given the same seed, datasets, and configuration,
//! two runs produce bitwise-identical parameters and history. Every noise
//! source is a counter-based stream (shuffling keyed by (seed, epoch),
//! dropout masks keyed by (seed, epoch, batch)), and parameters are kept on
//! the f32 grid after every update so 32-bit checkpoints are lossless.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::autodiff::{ops, AdError, Tape, Tensor, Values};
use crate::metrics::{self, EvalReport, MetricsError};
use crate::model::{forward_with, Mode, ModelError, ModelParams, PairInput};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub l2_lambda: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// stop after this many epochs without a validation-AUC improvement
    pub patience: Option<usize>,
    /// disable dropout noise so runs are reproducible coordinate-by-coordinate
    /// under gradient checking
    pub deterministic: bool,
    /// decision threshold used for the accuracy column of the history
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 512,
            max_epochs: 100,
            l2_lambda: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 42,
            patience: None,
            deterministic: false,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.learning_rate <= 0.0 {
            return Err(TrainError::BadConfig("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::BadConfig("batch_size must be at least 1".into()));
        }
        if self.l2_lambda < 0.0 {
            return Err(TrainError::BadConfig("l2_lambda must be non-negative".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(TrainError::BadConfig(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        if self.adam_eps <= 0.0 {
            return Err(TrainError::BadConfig("adam_eps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    BadConfig(String),
    #[error("{which} set is empty")]
    EmptyDataset { which: &'static str },
    #[error("label at index {index} is {value}, expected 0 or 1")]
    BadLabel { index: usize, value: u8 },
    #[error("validation set contains a single class; AUC-based model selection is undefined")]
    SingleClassValidation,
    #[error("non-finite gradient in parameter {name}")]
    NonFiniteGradient { name: String },
    #[error("gradient for {name} has shape {got:?}, parameter has {expected:?}")]
    GradientShape { name: String, got: Vec<usize>, expected: Vec<usize> },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Splitmix-style combiner for deriving per-epoch / per-batch seeds.
fn mix(parts: &[u64]) -> u64 {
    let mut z: u64 = 0x243f_6a88_85a3_08d3;
    for &p in parts {
        z ^= p.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x2545_f491_4f6c_dd1d);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

/// Which tensors the L2 penalty covers: affine weight matrices and conv
/// kernels. Biases, batchnorm scale/shift, token embeddings, and the bridge
/// node bank are exempt.
pub fn is_l2_regularized(name: &str) -> bool {
    name.ends_with(".weight") || name.ends_with(".kernel")
}

/// Mean binary cross-entropy of `probs` against `labels`, plus
/// `l2_lambda * sum of squared entries` over every regularized tensor in
/// `tensors`. Differentiable end to end.
pub fn compute_loss(
    probs: &Tensor,
    labels: &[u8],
    tensors: &BTreeMap<String, Tensor>,
    l2_lambda: f64,
) -> Result<Tensor, TrainError> {
    for (index, &value) in labels.iter().enumerate() {
        if value > 1 {
            return Err(TrainError::BadLabel { index, value });
        }
    }
    let label_vals = Values::vector(labels.iter().map(|&y| f64::from(y)).collect());
    let mut loss = ops::bce_mean(probs, &Tensor::constant(label_vals))?;
    if l2_lambda > 0.0 {
        let mut penalty: Option<Tensor> = None;
        for (name, tensor) in tensors {
            if !is_l2_regularized(name) {
                continue;
            }
            let sq = ops::sum_sq(tensor)?;
            penalty = Some(match penalty {
                Some(acc) => ops::add(&acc, &sq)?,
                None => sq,
            });
        }
        if let Some(p) = penalty {
            loss = ops::add(&loss, &ops::scale(&p, l2_lambda)?)?;
        }
    }
    Ok(loss)
}

/// First/second moment accumulators plus the step counter. Moments appear
/// lazily the first time a tensor receives a gradient.
#[derive(Debug, Default, Clone)]
pub struct AdamState {
    m: BTreeMap<String, Values>,
    v: BTreeMap<String, Values>,
    t: u64,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update over every tensor named in `grads`.
    /// Parameters without a gradient this step keep their value and their
    /// moments untouched.
    pub fn step(
        &mut self,
        params: &mut ModelParams,
        grads: &BTreeMap<String, Values>,
        cfg: &TrainConfig,
    ) -> Result<(), TrainError> {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        for (name, grad) in grads {
            let param = params
                .get_mut(name)
                .ok_or_else(|| ModelError::MissingParam(name.clone()))?;
            if grad.shape() != param.shape() {
                return Err(TrainError::GradientShape {
                    name: name.clone(),
                    got: grad.shape().to_vec(),
                    expected: param.shape().to_vec(),
                });
            }
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(TrainError::NonFiniteGradient { name: name.clone() });
            }
            let m = self
                .m
                .entry(name.clone())
                .or_insert_with(|| Values::zeros(grad.shape().to_vec()));
            let v = self
                .v
                .entry(name.clone())
                .or_insert_with(|| Values::zeros(grad.shape().to_vec()));
            let pd = param.data_mut();
            for ((p, &g), (m, v)) in pd
                .iter_mut()
                .zip(grad.iter())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()))
            {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
            }
            param.round_to_f32();
        }
        Ok(())
    }
}

/// Inference probabilities for `inputs`, processed in `batch_size` chunks.
pub fn predict_probs(
    params: &ModelParams,
    inputs: &[PairInput],
    batch_size: usize,
) -> Result<Vec<f64>, TrainError> {
    let mut probs = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(batch_size.max(1)) {
        let out = crate::model::forward_batch(params, None, chunk, &Mode::Inference)?;
        probs.extend_from_slice(out.data());
    }
    Ok(probs)
}

/// Inference evaluation of a labeled set (AUC left undefined when the set is
/// single-class; see [`metrics::evaluate`]).
pub fn evaluate_set(
    params: &ModelParams,
    set: &[(PairInput, u8)],
    batch_size: usize,
    threshold: f64,
) -> Result<EvalReport, TrainError> {
    let inputs: Vec<PairInput> = set.iter().map(|(p, _)| p.clone()).collect();
    let labels: Vec<u8> = set.iter().map(|(_, y)| *y).collect();
    let probs = predict_probs(params, &inputs, batch_size)?;
    Ok(metrics::evaluate(&probs, &labels, threshold)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: f64,
    pub val_acc: f64,
}

pub const HISTORY_CSV_HEADER: &str = "epoch,train_loss,val_auc,val_acc";

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from(HISTORY_CSV_HEADER);
    out.push('\n');
    for r in history {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            r.epoch, r.train_loss, r.val_auc, r.val_acc
        ));
    }
    out
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// parameters from the epoch with the best validation AUC
    pub best_params: ModelParams,
    /// 1-based epoch the best snapshot came from; 0 means training never ran
    pub best_epoch: usize,
    pub best_val_auc: f64,
    pub history: Vec<EpochRecord>,
}

/// Optimize `params` on `train_set`, selecting the snapshot with the best
/// validation AUC. The callback sees each epoch record as it is produced
/// (progress reporting); the same records come back in the outcome.
pub fn train(
    params: ModelParams,
    train_set: &[(PairInput, u8)],
    valid_set: &[(PairInput, u8)],
    cfg: &TrainConfig,
    mut on_epoch: Option<&mut dyn FnMut(&EpochRecord)>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyDataset { which: "train" });
    }
    if valid_set.is_empty() {
        return Err(TrainError::EmptyDataset { which: "validation" });
    }
    for (index, (_, value)) in train_set.iter().enumerate() {
        if *value > 1 {
            return Err(TrainError::BadLabel { index, value: *value });
        }
    }

    let mut params = params;
    let mut adam = AdamState::new();
    let mut best_params = params.clone();
    let mut best_epoch = 0usize;
    let mut best_val_auc = f64::NAN;
    let mut history = Vec::new();
    let mut epochs_since_best = 0usize;

    for epoch in 1..=cfg.max_epochs {
        // fresh permutation per epoch, independent of every other stream
        let mut indices: Vec<usize> = (0..train_set.len()).collect();
        let mut shuffle_rng = ChaCha12Rng::seed_from_u64(mix(&[cfg.seed, epoch as u64]));
        indices.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (batch_index, chunk) in indices.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<PairInput> =
                chunk.iter().map(|&i| train_set[i].0.clone()).collect();
            let labels: Vec<u8> = chunk.iter().map(|&i| train_set[i].1).collect();

            let tape = Tape::new();
            let tensors = params.leaf_map(&tape);
            let mode = Mode::Train {
                dropout_seed: if cfg.deterministic {
                    None
                } else {
                    Some(mix(&[cfg.seed, epoch as u64, batch_index as u64, 0xd70]))
                },
            };
            let probs = forward_with(&params, &tensors, &batch, &mode)?;
            let loss = compute_loss(&probs, &labels, &tensors, cfg.l2_lambda)?;
            loss_sum += loss.item();
            batches += 1;

            let mut grads = tape.backward(&loss)?;
            let mut grad_map = BTreeMap::new();
            for (name, tensor) in &tensors {
                if let Some(id) = tensor.node_id() {
                    if let Some(g) = grads.take(id) {
                        grad_map.insert(name.clone(), g);
                    }
                }
            }
            adam.step(&mut params, &grad_map, cfg)?;
        }

        let report = evaluate_set(&params, valid_set, cfg.batch_size, cfg.threshold)?;
        if !report.auc_defined {
            return Err(TrainError::SingleClassValidation);
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            val_auc: report.auc,
            val_acc: report.acc,
        };
        if let Some(cb) = on_epoch.as_deref_mut() {
            cb(&record);
        }
        history.push(record);

        if best_val_auc.is_nan() || report.auc > best_val_auc {
            best_val_auc = report.auc;
            best_epoch = epoch;
            best_params = params.clone();
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if let Some(patience) = cfg.patience {
                if epochs_since_best >= patience {
                    break;
                }
            }
        }
    }

    Ok(TrainOutcome { best_params, best_epoch, best_val_auc, history })
}
