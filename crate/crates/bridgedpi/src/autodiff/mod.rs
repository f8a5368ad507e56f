//! Reverse-mode automatic differentiation on flat `f64` tensors.
//!
//! The surface is deliberately small: exactly the primitives the network
//! needs (affine maps, 1-D convolution, global max pooling, batch
//! normalization, dropout, ReLU, sigmoid, element-wise product, cosine
//! similarity, degree normalization, and the structural glue), a tape that
//! records them, and a finite-difference checker that keeps every backward
//! rule honest.

mod check;
mod dispatch;
pub mod ops;
mod tape;
mod values;

pub use check::{check_gradients, FdConfig, FdReport, FdWorst};
pub use dispatch::{apply_primitive, PrimAttrs, PrimitiveKind};
pub use ops::{
    add, add_bias, batchnorm_infer, batchnorm_train, bce_mean, concat_rows, conv1d,
    cosine_similarity_matrix, degree_normalize, dropout, dropout_with_mask, elementwise_mul,
    embedding, global_maxpool, matmul, relu, reshape, scale, sigmoid, slice_rows, sum_sq,
    BatchStats, BCE_CLAMP, BN_EPS, COSINE_EPS, DEGREE_EPS,
};
pub use tape::{Gradients, Tape, Tensor};
pub use values::{matmul as matmul_values, matmul_nt, matmul_tn, Values};

use thiserror::Error;

/// Failures from recording, differentiating, or checking.
#[derive(Debug, Error)]
pub enum AdError {
    #[error("shape mismatch in {op}: {msg}")]
    Shape { op: &'static str, msg: String },

    #[error("inputs of {op} live on different tapes")]
    MixedTapes { op: &'static str },

    #[error("backward target is not tracked on any tape")]
    UntrackedBackward,

    #[error("backward requires a scalar output, got shape {shape:?}")]
    NonScalarBackward { shape: Vec<usize> },

    #[error("tape already consumed by a previous backward pass")]
    TapeConsumed,

    #[error("unknown primitive kind `{0}`")]
    UnknownPrimitive(String),

    #[error("dropout invoked in inference mode")]
    DropoutInInference,

    #[error("{op}: index {index} out of range (bound {bound})")]
    IndexOutOfRange { op: &'static str, index: usize, bound: usize },

    #[error("apply_primitive: {op} is missing required attribute `{attr}`")]
    MissingAttr { op: &'static str, attr: &'static str },

    #[error("function is not deterministic: repeated forward passes gave {first} and {second}")]
    Nondeterministic { first: f64, second: f64 },

    #[error(
        "gradient check failed at input {input}, coordinate {coord}: \
         backward {analytic:e} vs central difference {numeric:e} (relative error {rel_err:e})"
    )]
    GradientCheck { input: usize, coord: usize, analytic: f64, numeric: f64, rel_err: f64 },
}
