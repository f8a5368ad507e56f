//! A string-keyed front door over the typed ops, for debugging harnesses and
//! tests that iterate over every primitive by name.

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::ops;
use super::tape::Tensor;
use super::AdError;

/// Identifier accepted by [`apply_primitive`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrimitiveKind {
    Matmul,
    Add,
    AddBias,
    Scale,
    Relu,
    Sigmoid,
    ElementwiseMul,
    Conv1d,
    GlobalMaxpool,
    Batchnorm,
    Dropout,
    CosineSimilarityMatrix,
    DegreeNormalize,
    Concat,
    Slice,
    Embedding,
    Reshape,
    BceMean,
    SumSq,
}

impl FromStr for PrimitiveKind {
    type Err = AdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use PrimitiveKind::*;
        Ok(match s {
            "matmul" => Matmul,
            "add" => Add,
            "add_bias" => AddBias,
            "scale" => Scale,
            "relu" => Relu,
            "sigmoid" => Sigmoid,
            "elementwise_mul" => ElementwiseMul,
            "conv1d" => Conv1d,
            "global_maxpool" => GlobalMaxpool,
            "batchnorm" => Batchnorm,
            "dropout" => Dropout,
            "cosine_similarity_matrix" => CosineSimilarityMatrix,
            "degree_normalize" => DegreeNormalize,
            "concat" => Concat,
            "slice" => Slice,
            "embedding" => Embedding,
            "reshape" => Reshape,
            "bce_mean" => BceMean,
            "sum_sq" => SumSq,
            other => return Err(AdError::UnknownPrimitive(other.to_string())),
        })
    }
}

/// Attributes for primitives that need more than their tensor inputs.
#[derive(Clone, Debug, Default)]
pub struct PrimAttrs {
    /// Multiplier for `scale`.
    pub factor: Option<f64>,
    /// Drop probability for `dropout`.
    pub rate: Option<f64>,
    /// Mode switch for `batchnorm` and `dropout`.
    pub train: Option<bool>,
    /// Mask seed for `dropout`.
    pub seed: Option<u64>,
    /// Row range for `slice`.
    pub start: Option<usize>,
    pub len: Option<usize>,
    /// Target shape for `reshape`.
    pub shape: Option<Vec<usize>>,
    /// Token ids for `embedding`.
    pub ids: Option<Vec<usize>>,
}

impl PrimAttrs {
    fn need_factor(&self, op: &'static str) -> Result<f64, AdError> {
        self.factor.ok_or(AdError::MissingAttr { op, attr: "factor" })
    }
}

/// Execute one primitive by name.
///
/// `batchnorm` takes inputs `[x, gamma, beta]` in training mode (running
/// statistics are the caller's concern) and `[x, gamma, beta, running_mean,
/// running_var]` in inference mode. `dropout` requires `train = true` and a
/// seed; everything else reads only what its typed counterpart needs.
pub fn apply_primitive(
    kind: PrimitiveKind,
    inputs: &[&Tensor],
    attrs: &PrimAttrs,
) -> Result<Tensor, AdError> {
    use PrimitiveKind::*;
    let arity = |n: usize| -> Result<(), AdError> {
        if inputs.len() == n {
            Ok(())
        } else {
            Err(AdError::Shape {
                op: "apply_primitive",
                msg: format!("{kind:?} expects {n} inputs, got {}", inputs.len()),
            })
        }
    };
    match kind {
        Matmul => {
            arity(2)?;
            ops::matmul(inputs[0], inputs[1])
        }
        Add => {
            arity(2)?;
            ops::add(inputs[0], inputs[1])
        }
        AddBias => {
            arity(2)?;
            ops::add_bias(inputs[0], inputs[1])
        }
        Scale => {
            arity(1)?;
            ops::scale(inputs[0], attrs.need_factor("scale")?)
        }
        Relu => {
            arity(1)?;
            ops::relu(inputs[0])
        }
        Sigmoid => {
            arity(1)?;
            ops::sigmoid(inputs[0])
        }
        ElementwiseMul => {
            arity(2)?;
            ops::elementwise_mul(inputs[0], inputs[1])
        }
        Conv1d => {
            arity(2)?;
            ops::conv1d(inputs[0], inputs[1])
        }
        GlobalMaxpool => {
            arity(1)?;
            ops::global_maxpool(inputs[0])
        }
        Batchnorm => {
            if attrs.train.unwrap_or(false) {
                arity(3)?;
                ops::batchnorm_train(inputs[0], inputs[1], inputs[2]).map(|(t, _)| t)
            } else {
                arity(5)?;
                ops::batchnorm_infer(inputs[0], inputs[1], inputs[2], inputs[3].vals(), inputs[4].vals())
            }
        }
        Dropout => {
            arity(1)?;
            if !attrs.train.unwrap_or(false) {
                return Err(AdError::DropoutInInference);
            }
            let rate = attrs.rate.ok_or(AdError::MissingAttr { op: "dropout", attr: "rate" })?;
            let mut rng = ChaCha12Rng::seed_from_u64(attrs.seed.unwrap_or(0));
            ops::dropout(inputs[0], rate, &mut rng)
        }
        CosineSimilarityMatrix => {
            arity(1)?;
            ops::cosine_similarity_matrix(inputs[0])
        }
        DegreeNormalize => {
            arity(1)?;
            ops::degree_normalize(inputs[0])
        }
        Concat => ops::concat_rows(inputs),
        Slice => {
            arity(1)?;
            let start = attrs.start.ok_or(AdError::MissingAttr { op: "slice", attr: "start" })?;
            let len = attrs.len.ok_or(AdError::MissingAttr { op: "slice", attr: "len" })?;
            ops::slice_rows(inputs[0], start, len)
        }
        Embedding => {
            arity(1)?;
            let ids = attrs.ids.as_ref().ok_or(AdError::MissingAttr { op: "embedding", attr: "ids" })?;
            ops::embedding(inputs[0], ids)
        }
        Reshape => {
            arity(1)?;
            let shape = attrs.shape.clone().ok_or(AdError::MissingAttr { op: "reshape", attr: "shape" })?;
            ops::reshape(inputs[0], shape)
        }
        BceMean => {
            arity(2)?;
            ops::bce_mean(inputs[0], inputs[1])
        }
        SumSq => {
            arity(1)?;
            ops::sum_sq(inputs[0])
        }
    }
}
