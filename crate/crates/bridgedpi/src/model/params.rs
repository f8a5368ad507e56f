//! Parameter storage: named tensors, seeded initialization, and the
//! batchnorm running statistics that training maintains alongside them.
//!
//! Every tensor gets its own RNG stream derived from (run seed, tensor
//! name), so two models initialized with the same seed agree on every
//! tensor they share even when their configurations differ elsewhere —
//! which is what makes branch-ablation comparisons exact.
//!
//! All values are kept on the f32 grid (stored as f64, rounded after every
//! write) so that 32-bit checkpoints round-trip bit for bit.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::autodiff::{Tape, Tensor, Values};

use super::{ModelConfig, ModelError};

#[derive(Debug, Clone, Copy)]
enum Init {
    /// uniform in ±1/sqrt(fan_in), the usual affine/conv default
    UniformFanIn(usize),
    /// zero-mean normal with the given standard deviation
    Normal(f64),
    Ones,
    Zeros,
}

struct TensorSpec {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

/// Enumerate every learnable tensor the configuration calls for, in the
/// fixed order used by checkpoints, gradient collection, and the optimizer.
fn tensor_specs(cfg: &ModelConfig) -> Vec<TensorSpec> {
    let mut specs = Vec::new();
    let mut push = |name: String, shape: Vec<usize>, init: Init| {
        specs.push(TensorSpec { name, shape, init });
    };
    let d = cfg.embed_dim;

    let mlp = |prefix: &str, input: usize, widths: &[usize], push: &mut dyn FnMut(String, Vec<usize>, Init)| {
        let mut fan_in = input;
        for (i, &out) in widths.iter().enumerate() {
            push(format!("{prefix}.{i}.weight"), vec![fan_in, out], Init::UniformFanIn(fan_in));
            push(format!("{prefix}.{i}.bias"), vec![out], Init::UniformFanIn(fan_in));
            push(format!("{prefix}.{i}.bn_gamma"), vec![out], Init::Ones);
            push(format!("{prefix}.{i}.bn_beta"), vec![out], Init::Zeros);
            fan_in = out;
        }
    };

    if cfg.use_protein_kmer {
        mlp("protein_mlp", cfg.kmer_dim, &cfg.protein_mlp_widths, &mut push);
    }
    if cfg.use_protein_cnn {
        push(
            "protein_cnn.embed".into(),
            vec![cfg.protein_vocab_size, cfg.token_embed_dim],
            Init::Normal(1.0),
        );
        let fan = cfg.protein_conv_kernel * cfg.token_embed_dim;
        push(
            "protein_cnn.kernel".into(),
            vec![cfg.protein_conv_kernel, cfg.token_embed_dim, d],
            Init::UniformFanIn(fan),
        );
        push("protein_cnn.bias".into(), vec![d], Init::UniformFanIn(fan));
    }
    if cfg.use_drug_fp {
        mlp("drug_mlp", cfg.fingerprint_bits, &cfg.drug_mlp_widths, &mut push);
    }
    if cfg.use_drug_cnn {
        push(
            "drug_cnn.embed".into(),
            vec![cfg.smiles_vocab_size, cfg.token_embed_dim],
            Init::Normal(1.0),
        );
        let fan = cfg.drug_conv_kernel * cfg.token_embed_dim;
        push(
            "drug_cnn.kernel".into(),
            vec![cfg.drug_conv_kernel, cfg.token_embed_dim, d],
            Init::UniformFanIn(fan),
        );
        push("drug_cnn.bias".into(), vec![d], Init::UniformFanIn(fan));
    }
    if cfg.hyper_nodes > 0 {
        push(
            "hyper_nodes".into(),
            vec![cfg.hyper_nodes as usize, d],
            Init::Normal(0.1),
        );
    }
    if cfg.hyper_nodes >= 0 {
        for i in 0..cfg.gnn_layers {
            push(format!("gnn.{i}.weight"), vec![d, d], Init::UniformFanIn(d));
            push(format!("gnn.{i}.bias"), vec![d], Init::UniformFanIn(d));
        }
    }
    for i in 0..cfg.head_layers - 1 {
        push(format!("head.{i}.weight"), vec![d, d], Init::UniformFanIn(d));
        push(format!("head.{i}.bias"), vec![d], Init::UniformFanIn(d));
        push(format!("head.{i}.bn_gamma"), vec![d], Init::Ones);
        push(format!("head.{i}.bn_beta"), vec![d], Init::Zeros);
    }
    push("head.out.weight".into(), vec![d, 1], Init::UniformFanIn(d));
    push("head.out.bias".into(), vec![1], Init::UniformFanIn(d));
    specs
}

/// Per-tensor RNG stream: FNV over the name, avalanched together with the
/// run seed. Independent of enumeration order by construction.
fn tensor_seed(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn sample(shape: &[usize], init: Init, rng: &mut ChaCha12Rng) -> Values {
    let len: usize = shape.iter().product();
    let data: Vec<f64> = match init {
        Init::UniformFanIn(fan_in) => {
            let bound = 1.0 / (fan_in as f64).sqrt();
            (0..len).map(|_| rng.gen_range(-bound..bound)).collect()
        }
        Init::Normal(std) => {
            // Box-Muller; two uniforms per draw keeps the stream simple
            (0..len)
                .map(|_| {
                    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                    let u2: f64 = rng.gen_range(0.0..1.0);
                    std * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
                })
                .collect()
        }
        Init::Ones => vec![1.0; len],
        Init::Zeros => vec![0.0; len],
    };
    let mut v = Values::new(shape.to_vec(), data);
    v.round_to_f32();
    v
}

/// The complete learnable state of one model, plus batchnorm running
/// statistics (mean/variance per normalized layer, momentum 0.9).
///
/// Running stats sit behind a mutex because training-mode forward passes
/// fold fresh batch statistics into them while the rest of the struct is
/// shared read-only.
pub struct ModelParams {
    config: ModelConfig,
    tensors: BTreeMap<String, Arc<Values>>,
    running: Mutex<BTreeMap<String, Values>>,
}

impl Clone for ModelParams {
    fn clone(&self) -> Self {
        ModelParams {
            config: self.config.clone(),
            tensors: self.tensors.clone(),
            running: Mutex::new(self.running.lock().unwrap().clone()),
        }
    }
}

impl std::fmt::Debug for ModelParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ModelParams({} tensors, {} scalars)", self.tensors.len(), self.scalar_count())
    }
}

pub(crate) const BN_MOMENTUM: f64 = 0.9;

impl ModelParams {
    /// Fresh parameters for `config`, deterministically seeded.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut tensors = BTreeMap::new();
        let mut running = BTreeMap::new();
        for spec in tensor_specs(&config) {
            let mut rng = ChaCha12Rng::seed_from_u64(tensor_seed(seed, &spec.name));
            tensors.insert(spec.name.clone(), Arc::new(sample(&spec.shape, spec.init, &mut rng)));
            if let Some(layer) = spec.name.strip_suffix(".bn_gamma") {
                let feats = spec.shape[0];
                running.insert(format!("{layer}.bn_mean"), Values::zeros(vec![feats]));
                running.insert(format!("{layer}.bn_var"), Values::full(vec![feats], 1.0));
            }
        }
        Ok(ModelParams { config, tensors, running: Mutex::new(running) })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Tensor names in their canonical (sorted) order.
    pub fn names(&self) -> Vec<String> {
        self.tensors.keys().cloned().collect()
    }

    pub fn get(&self, name: &str) -> Option<&Arc<Values>> {
        self.tensors.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Arc<Values>)> {
        self.tensors.iter()
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.values().map(|v| v.len()).sum()
    }

    /// Replace a tensor (shape-checked). Values are snapped to the f32 grid
    /// like every other write.
    pub fn set(&mut self, name: &str, mut values: Values) -> Result<(), ModelError> {
        let slot = self
            .tensors
            .get_mut(name)
            .ok_or_else(|| ModelError::MissingParam(name.to_string()))?;
        if values.shape() != slot.shape() {
            return Err(ModelError::Config(format!(
                "tensor {name} has shape {:?}, tried to set {:?}",
                slot.shape(),
                values.shape()
            )));
        }
        values.round_to_f32();
        *slot = Arc::new(values);
        Ok(())
    }

    /// Mutable access for in-place optimizer updates. Clones the buffer only
    /// if something else still holds a reference from an earlier forward.
    pub fn get_mut(&mut self, name: &str) -> Option<&mut Values> {
        self.tensors.get_mut(name).map(Arc::make_mut)
    }

    /// Snapshot of the batchnorm running statistics.
    pub fn running_stats(&self) -> BTreeMap<String, Values> {
        self.running.lock().unwrap().clone()
    }

    pub(crate) fn running_pair(&self, layer: &str) -> Option<(Values, Values)> {
        let guard = self.running.lock().unwrap();
        Some((
            guard.get(&format!("{layer}.bn_mean"))?.clone(),
            guard.get(&format!("{layer}.bn_var"))?.clone(),
        ))
    }

    /// Fold batch statistics into the running estimates:
    /// `running <- momentum * running + (1 - momentum) * batch`.
    pub(crate) fn update_running(&self, layer: &str, mean: &[f64], var: &[f64]) {
        let mut guard = self.running.lock().unwrap();
        for (suffix, batch) in [(".bn_mean", mean), (".bn_var", var)] {
            if let Some(slot) = guard.get_mut(&format!("{layer}{suffix}")) {
                for (r, &b) in slot.data_mut().iter_mut().zip(batch) {
                    *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * b;
                }
                slot.round_to_f32();
            }
        }
    }

    /// Overwrite a running statistic (checkpoint restore).
    pub fn set_running(&self, name: &str, mut values: Values) -> Result<(), ModelError> {
        let mut guard = self.running.lock().unwrap();
        match guard.get_mut(name) {
            Some(slot) if slot.shape() == values.shape() => {
                values.round_to_f32();
                *slot = values;
                Ok(())
            }
            Some(slot) => Err(ModelError::Config(format!(
                "running stat {name} has shape {:?}, tried to set {:?}",
                slot.shape(),
                values.shape()
            ))),
            None => Err(ModelError::MissingParam(name.to_string())),
        }
    }

    /// Register every tensor as a gradient leaf on `tape`; the map's
    /// iteration order is the canonical name order.
    pub fn leaf_map(&self, tape: &Tape) -> BTreeMap<String, Tensor> {
        self.tensors
            .iter()
            .map(|(name, vals)| (name.clone(), tape.leaf(vals)))
            .collect()
    }

    /// Untracked view of the tensors, for inference.
    pub fn constant_map(&self) -> BTreeMap<String, Tensor> {
        self.tensors
            .iter()
            .map(|(name, vals)| (name.clone(), Tensor::constant_arc(vals.clone())))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_tensors() {
        let a = ModelParams::init(ModelConfig::default(), 7).unwrap();
        let b = ModelParams::init(ModelConfig::default(), 7).unwrap();
        for (name, va) in a.iter() {
            assert_eq!(va.data(), b.get(name).unwrap().data(), "{name}");
        }
    }

    #[test]
    fn different_seed_different_weights() {
        let a = ModelParams::init(ModelConfig::default(), 7).unwrap();
        let b = ModelParams::init(ModelConfig::default(), 8).unwrap();
        assert_ne!(
            a.get("head.out.weight").unwrap().data(),
            b.get("head.out.weight").unwrap().data()
        );
    }

    #[test]
    fn shared_tensors_agree_across_configs() {
        // the ablated model must start from the same branch weights as the
        // full one, otherwise toggle comparisons are meaningless
        let full = ModelParams::init(ModelConfig::default(), 3).unwrap();
        let ablated = ModelParams::init(
            ModelConfig {
                use_drug_cnn: false,
                ..ModelConfig::default()
            },
            3,
        )
        .unwrap();
        for (name, v) in ablated.iter() {
            assert_eq!(v.data(), full.get(name).unwrap().data(), "{name}");
        }
        assert!(full.get("drug_cnn.embed").is_some());
        assert!(ablated.get("drug_cnn.embed").is_none());
    }

    #[test]
    fn bypass_has_no_graph_tensors() {
        let p = ModelParams::init(
            ModelConfig {
                hyper_nodes: -1,
                ..ModelConfig::default()
            },
            1,
        )
        .unwrap();
        assert!(p.get("hyper_nodes").is_none());
        assert!(p.get("gnn.0.weight").is_none());
    }

    #[test]
    fn pair_only_graph_keeps_gnn_but_no_bank() {
        let p = ModelParams::init(
            ModelConfig {
                hyper_nodes: 0,
                ..ModelConfig::default()
            },
            1,
        )
        .unwrap();
        assert!(p.get("hyper_nodes").is_none());
        assert!(p.get("gnn.0.weight").is_some());
    }

    #[test]
    fn everything_lands_on_the_f32_grid() {
        let p = ModelParams::init(ModelConfig::default(), 11).unwrap();
        for (name, v) in p.iter() {
            for &x in v.data() {
                assert_eq!(x, x as f32 as f64, "{name}");
            }
        }
    }

    #[test]
    fn bn_stats_exist_per_normalized_layer() {
        let p = ModelParams::init(ModelConfig::default(), 11).unwrap();
        let stats = p.running_stats();
        assert!(stats.contains_key("protein_mlp.0.bn_mean"));
        assert!(stats.contains_key("head.0.bn_var"));
        // final head projection is not normalized
        assert!(!stats.contains_key("head.out.bn_mean"));
        assert!(p.get("head.out.bn_gamma").is_none());
    }

    #[test]
    fn set_rejects_wrong_shape() {
        let mut p = ModelParams::init(ModelConfig::default(), 11).unwrap();
        assert!(p.set("head.out.bias", Values::zeros(vec![2])).is_err());
        assert!(p.set("nope", Values::zeros(vec![1])).is_err());
    }

    #[test]
    fn running_update_uses_momentum() {
        let p = ModelParams::init(ModelConfig::default(), 11).unwrap();
        let feats = p.config().protein_mlp_widths[0];
        p.update_running("protein_mlp.0", &vec![1.0; feats], &vec![2.0; feats]);
        let stats = p.running_stats();
        let mean = stats["protein_mlp.0.bn_mean"].data()[0];
        let var = stats["protein_mlp.0.bn_var"].data()[0];
        assert!((mean - 0.1).abs() < 1e-7); // 0.9 * 0 + 0.1 * 1
        assert!((var - 1.1).abs() < 1e-7); // 0.9 * 1 + 0.1 * 2
    }
}
