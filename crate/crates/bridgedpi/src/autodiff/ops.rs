//! Differentiable primitives: forward kernels, tape recording, and the
//! backward rule for each operation.
//!
//! Every op validates shapes, computes the forward value, and — when any
//! input is tracked — pushes a [`Rule`] holding exactly what its backward
//! pass needs (parent node ids plus saved values). Inputs that are plain
//! constants take part in the computation but never receive gradients.

use std::sync::Arc;

use rand::Rng;

use super::tape::{add_grad, Tape, Tensor};
use super::values::{self, Values};
use super::AdError;

/// Additive guard on cosine-similarity denominators, so zero vectors map to
/// zero similarity instead of NaN.
pub const COSINE_EPS: f64 = 1e-8;
/// Variance floor inside batch normalization.
pub const BN_EPS: f64 = 1e-5;
/// Degree floor inside the symmetric adjacency normalization.
pub const DEGREE_EPS: f64 = 1e-12;
/// Probabilities are clamped to [EPS, 1−EPS] inside the cross-entropy loss.
pub const BCE_CLAMP: f64 = 1e-7;

/// A backward-pass reference to one op input: its node id (when tracked) and
/// its forward values (always, for rules that need them).
pub(super) struct ArgRef {
    id: Option<usize>,
    vals: Arc<Values>,
}

impl ArgRef {
    fn of(t: &Tensor) -> Self {
        ArgRef { id: t.node_id(), vals: Arc::clone(t.vals_arc()) }
    }
}

/// Backward rule for one recorded node.
pub(super) enum Rule {
    Leaf,
    Matmul { a: ArgRef, b: ArgRef },
    Add { a: Option<usize>, b: Option<usize> },
    AddBias { x: Option<usize>, b: Option<usize> },
    Scale { x: Option<usize>, factor: f64 },
    Relu { x: ArgRef },
    Sigmoid { x: Option<usize>, y: Arc<Values> },
    Mul { a: ArgRef, b: ArgRef },
    Conv1d { x: ArgRef, kernel: ArgRef },
    GlobalMaxPool { x: Option<usize>, argmax: Vec<usize>, in_shape: Vec<usize> },
    BatchNormTrain {
        x: Option<usize>,
        gamma: ArgRef,
        beta: Option<usize>,
        xhat: Arc<Values>,
        inv_std: Vec<f64>,
    },
    BatchNormInfer {
        x: Option<usize>,
        gamma: ArgRef,
        beta: Option<usize>,
        xhat: Arc<Values>,
        inv_std: Vec<f64>,
    },
    Dropout { x: Option<usize>, mask: Arc<Values> },
    CosineMatrix { z: ArgRef, normed: Arc<Values>, norms: Vec<f64> },
    DegreeNormalize { a: ArgRef, scale: Vec<f64> },
    ConcatRows { parts: Vec<(Option<usize>, usize)>, cols: usize },
    SliceRows { x: Option<usize>, start: usize, in_shape: Vec<usize> },
    Embedding { table: Option<usize>, ids: Vec<usize>, table_shape: Vec<usize> },
    Reshape { x: Option<usize>, in_shape: Vec<usize> },
    BceMean { p: ArgRef, labels: Arc<Values> },
    SumSq { x: ArgRef },
}

/// The tape shared by all tracked inputs, or an error when two inputs live
/// on different tapes.
fn joint_tape(op: &'static str, inputs: &[&Tensor]) -> Result<Option<Tape>, AdError> {
    let mut found: Option<Tape> = None;
    for t in inputs {
        if let Some(tape) = t.tape() {
            match &found {
                None => found = Some(tape.clone()),
                Some(prev) if prev.same_tape(tape) => {}
                Some(_) => return Err(AdError::MixedTapes { op }),
            }
        }
    }
    Ok(found)
}

fn shape_err(op: &'static str, msg: String) -> AdError {
    AdError::Shape { op, msg }
}

fn finish(tape: Option<Tape>, rule: impl FnOnce() -> Rule, out: Values) -> Tensor {
    match tape {
        Some(tape) => tape.push(rule(), out),
        None => Tensor::constant(out),
    }
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

/// Matrix product `[m,k] x [k,n] -> [m,n]`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, AdError> {
    if a.vals().ndim() != 2 || b.vals().ndim() != 2 || a.shape()[1] != b.shape()[0] {
        return Err(shape_err("matmul", format!("{:?} x {:?}", a.shape(), b.shape())));
    }
    let tape = joint_tape("matmul", &[a, b])?;
    let out = values::matmul(a.vals(), b.vals());
    Ok(finish(tape, || Rule::Matmul { a: ArgRef::of(a), b: ArgRef::of(b) }, out))
}

/// Element-wise sum of two tensors with identical shapes.
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor, AdError> {
    if a.shape() != b.shape() {
        return Err(shape_err("add", format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let tape = joint_tape("add", &[a, b])?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    let out = Values::new(a.shape().to_vec(), data);
    Ok(finish(tape, || Rule::Add { a: a.node_id(), b: b.node_id() }, out))
}

/// Add a bias row vector `[c]` to every row of `[r,c]`.
pub fn add_bias(x: &Tensor, b: &Tensor) -> Result<Tensor, AdError> {
    if x.vals().ndim() != 2 || b.vals().ndim() != 1 || x.shape()[1] != b.shape()[0] {
        return Err(shape_err("add_bias", format!("{:?} + {:?}", x.shape(), b.shape())));
    }
    let tape = joint_tape("add_bias", &[x, b])?;
    let (r, c) = (x.shape()[0], x.shape()[1]);
    let mut data = x.data().to_vec();
    for row in 0..r {
        for col in 0..c {
            data[row * c + col] += b.data()[col];
        }
    }
    let out = Values::matrix(r, c, data);
    Ok(finish(tape, || Rule::AddBias { x: x.node_id(), b: b.node_id() }, out))
}

/// Multiply every entry by a fixed scalar.
pub fn scale(x: &Tensor, factor: f64) -> Result<Tensor, AdError> {
    let tape = joint_tape("scale", &[x])?;
    let data = x.data().iter().map(|v| v * factor).collect();
    let out = Values::new(x.shape().to_vec(), data);
    Ok(finish(tape, || Rule::Scale { x: x.node_id(), factor }, out))
}

/// Element-wise product of two tensors with identical shapes.
pub fn elementwise_mul(a: &Tensor, b: &Tensor) -> Result<Tensor, AdError> {
    if a.shape() != b.shape() {
        return Err(shape_err("elementwise_mul", format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let tape = joint_tape("elementwise_mul", &[a, b])?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    let out = Values::new(a.shape().to_vec(), data);
    Ok(finish(tape, || Rule::Mul { a: ArgRef::of(a), b: ArgRef::of(b) }, out))
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

/// max(x, 0); the subgradient at exactly 0 is 0.
pub fn relu(x: &Tensor) -> Result<Tensor, AdError> {
    let tape = joint_tape("relu", &[x])?;
    let data = x.data().iter().map(|v| v.max(0.0)).collect();
    let out = Values::new(x.shape().to_vec(), data);
    Ok(finish(tape, || Rule::Relu { x: ArgRef::of(x) }, out))
}

/// Numerically stable logistic function.
pub fn sigmoid(x: &Tensor) -> Result<Tensor, AdError> {
    let tape = joint_tape("sigmoid", &[x])?;
    let data = x
        .data()
        .iter()
        .map(|&v| {
            if v >= 0.0 {
                1.0 / (1.0 + (-v).exp())
            } else {
                let e = v.exp();
                e / (1.0 + e)
            }
        })
        .collect();
    let out = Arc::new(Values::new(x.shape().to_vec(), data));
    match tape {
        Some(tape) => {
            let rule = Rule::Sigmoid { x: x.node_id(), y: Arc::clone(&out) };
            Ok(tape.push_arc(rule, out))
        }
        None => Ok(Tensor::constant_arc(out)),
    }
}

// ---------------------------------------------------------------------------
// sequence ops
// ---------------------------------------------------------------------------

/// 1-D convolution, stride 1, zero "same" padding.
///
/// Input `[batch, length, in_channels]`, kernel `[width, in_channels,
/// out_channels]` with odd width, output `[batch, length, out_channels]`.
pub fn conv1d(x: &Tensor, kernel: &Tensor) -> Result<Tensor, AdError> {
    if x.vals().ndim() != 3 || kernel.vals().ndim() != 3 {
        return Err(shape_err("conv1d", format!("{:?} * {:?}", x.shape(), kernel.shape())));
    }
    let (bsz, len, cin) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (width, kin, cout) = (kernel.shape()[0], kernel.shape()[1], kernel.shape()[2]);
    if kin != cin {
        return Err(shape_err("conv1d", format!("input has {cin} channels, kernel expects {kin}")));
    }
    if width % 2 == 0 {
        return Err(shape_err("conv1d", format!("kernel width {width} must be odd for same padding")));
    }
    let tape = joint_tape("conv1d", &[x, kernel])?;
    let pad = (width - 1) / 2;
    let xd = x.data();
    let kd = kernel.data();
    let mut out = vec![0.0; bsz * len * cout];
    for b in 0..bsz {
        for t in 0..len {
            let o_base = (b * len + t) * cout;
            for dk in 0..width {
                let s = t + dk;
                if s < pad || s - pad >= len {
                    continue;
                }
                let s = s - pad;
                let x_base = (b * len + s) * cin;
                let k_base = dk * cin * cout;
                for ci in 0..cin {
                    let xv = xd[x_base + ci];
                    if xv == 0.0 {
                        continue;
                    }
                    let k_row = &kd[k_base + ci * cout..k_base + (ci + 1) * cout];
                    let o_row = &mut out[o_base..o_base + cout];
                    for (o, kv) in o_row.iter_mut().zip(k_row) {
                        *o += xv * kv;
                    }
                }
            }
        }
    }
    let out = Values::new(vec![bsz, len, cout], out);
    Ok(finish(tape, || Rule::Conv1d { x: ArgRef::of(x), kernel: ArgRef::of(kernel) }, out))
}

/// Maximum over the length axis: `[batch, length, channels] -> [batch, channels]`.
///
/// Ties resolve to the earliest position.
pub fn global_maxpool(x: &Tensor) -> Result<Tensor, AdError> {
    if x.vals().ndim() != 3 || x.shape()[1] == 0 {
        return Err(shape_err("global_maxpool", format!("{:?}", x.shape())));
    }
    let (bsz, len, ch) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let tape = joint_tape("global_maxpool", &[x])?;
    let xd = x.data();
    let mut out = vec![0.0; bsz * ch];
    let mut argmax = vec![0usize; bsz * ch];
    for b in 0..bsz {
        for c in 0..ch {
            let mut best = f64::NEG_INFINITY;
            let mut best_t = 0;
            for t in 0..len {
                let v = xd[(b * len + t) * ch + c];
                if v > best {
                    best = v;
                    best_t = t;
                }
            }
            out[b * ch + c] = best;
            argmax[b * ch + c] = best_t;
        }
    }
    let out = Values::matrix(bsz, ch, out);
    let in_shape = x.shape().to_vec();
    Ok(finish(tape, || Rule::GlobalMaxPool { x: x.node_id(), argmax, in_shape }, out))
}

// ---------------------------------------------------------------------------
// normalization and regularization
// ---------------------------------------------------------------------------

/// Batch statistics produced by a training-mode batchnorm call, for the
/// caller's running-average update.
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Biased (population) variance, matching what normalization used.
    pub var: Vec<f64>,
}

/// Batch normalization over rows of `[batch, features]` using batch
/// statistics, then per-feature scale and shift.
pub fn batchnorm_train(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
) -> Result<(Tensor, BatchStats), AdError> {
    let (bsz, feats) = bn_shapes("batchnorm", x, gamma, beta)?;
    let tape = joint_tape("batchnorm", &[x, gamma, beta])?;
    let xd = x.data();
    let mut mean = vec![0.0; feats];
    for row in 0..bsz {
        for f in 0..feats {
            mean[f] += xd[row * feats + f];
        }
    }
    for m in &mut mean {
        *m /= bsz as f64;
    }
    let mut var = vec![0.0; feats];
    for row in 0..bsz {
        for f in 0..feats {
            let d = xd[row * feats + f] - mean[f];
            var[f] += d * d;
        }
    }
    for v in &mut var {
        *v /= bsz as f64;
    }
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
    let mut xhat = vec![0.0; bsz * feats];
    let mut out = vec![0.0; bsz * feats];
    let gd = gamma.data();
    let bd = beta.data();
    for row in 0..bsz {
        for f in 0..feats {
            let h = (xd[row * feats + f] - mean[f]) * inv_std[f];
            xhat[row * feats + f] = h;
            out[row * feats + f] = h * gd[f] + bd[f];
        }
    }
    let xhat = Arc::new(Values::matrix(bsz, feats, xhat));
    let out = Values::matrix(bsz, feats, out);
    let stats = BatchStats { mean, var };
    let t = finish(
        tape,
        || Rule::BatchNormTrain {
            x: x.node_id(),
            gamma: ArgRef::of(gamma),
            beta: beta.node_id(),
            xhat,
            inv_std,
        },
        out,
    );
    Ok((t, stats))
}

/// Batch normalization as a fixed affine map using running statistics.
pub fn batchnorm_infer(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running_mean: &Values,
    running_var: &Values,
) -> Result<Tensor, AdError> {
    let (bsz, feats) = bn_shapes("batchnorm", x, gamma, beta)?;
    if running_mean.len() != feats || running_var.len() != feats {
        return Err(shape_err(
            "batchnorm",
            format!("running stats have {}/{} features, expected {feats}", running_mean.len(), running_var.len()),
        ));
    }
    let tape = joint_tape("batchnorm", &[x, gamma, beta])?;
    let inv_std: Vec<f64> = running_var.data().iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
    let xd = x.data();
    let gd = gamma.data();
    let bd = beta.data();
    let rm = running_mean.data();
    let mut xhat = vec![0.0; bsz * feats];
    let mut out = vec![0.0; bsz * feats];
    for row in 0..bsz {
        for f in 0..feats {
            let h = (xd[row * feats + f] - rm[f]) * inv_std[f];
            xhat[row * feats + f] = h;
            out[row * feats + f] = h * gd[f] + bd[f];
        }
    }
    let xhat = Arc::new(Values::matrix(bsz, feats, xhat));
    let out = Values::matrix(bsz, feats, out);
    Ok(finish(
        tape,
        || Rule::BatchNormInfer {
            x: x.node_id(),
            gamma: ArgRef::of(gamma),
            beta: beta.node_id(),
            xhat,
            inv_std,
        },
        out,
    ))
}

fn bn_shapes(op: &'static str, x: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<(usize, usize), AdError> {
    if x.vals().ndim() != 2 || x.shape()[0] == 0 {
        return Err(shape_err(op, format!("input {:?}", x.shape())));
    }
    let feats = x.shape()[1];
    if gamma.shape() != [feats] || beta.shape() != [feats] {
        return Err(shape_err(
            op,
            format!("scale {:?} / shift {:?} do not match {feats} features", gamma.shape(), beta.shape()),
        ));
    }
    Ok((x.shape()[0], feats))
}

/// Inverted dropout with a freshly sampled mask: each entry is zeroed with
/// probability `rate`, survivors are scaled by 1/(1−rate).
pub fn dropout<R: Rng>(x: &Tensor, rate: f64, rng: &mut R) -> Result<Tensor, AdError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(shape_err("dropout", format!("rate {rate} outside [0, 1)")));
    }
    let keep_scale = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..x.vals().len())
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep_scale })
        .collect();
    dropout_with_mask(x, Values::new(x.shape().to_vec(), mask))
}

/// Dropout against a caller-provided mask (entries 0 or the survivor scale).
/// Used by gradient checks, which need the same mask on every evaluation.
pub fn dropout_with_mask(x: &Tensor, mask: Values) -> Result<Tensor, AdError> {
    if mask.shape() != x.shape() {
        return Err(shape_err("dropout", format!("mask {:?} vs input {:?}", mask.shape(), x.shape())));
    }
    let tape = joint_tape("dropout", &[x])?;
    let data = x.data().iter().zip(mask.data()).map(|(v, m)| v * m).collect();
    let out = Values::new(x.shape().to_vec(), data);
    let mask = Arc::new(mask);
    Ok(finish(tape, || Rule::Dropout { x: x.node_id(), mask }, out))
}

// ---------------------------------------------------------------------------
// graph ops
// ---------------------------------------------------------------------------

/// Pairwise cosine similarity of the rows of `[n, d]`, yielding `[n, n]`.
///
/// Each row norm is guarded by +[`COSINE_EPS`] so zero rows produce zero
/// similarity rather than NaN.
pub fn cosine_similarity_matrix(z: &Tensor) -> Result<Tensor, AdError> {
    if z.vals().ndim() != 2 {
        return Err(shape_err("cosine_similarity_matrix", format!("{:?}", z.shape())));
    }
    let (n, d) = (z.shape()[0], z.shape()[1]);
    let tape = joint_tape("cosine_similarity_matrix", &[z])?;
    let zd = z.data();
    let mut norms = vec![0.0; n];
    let mut normed = vec![0.0; n * d];
    for i in 0..n {
        let row = &zd[i * d..(i + 1) * d];
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        norms[i] = norm;
        let r = 1.0 / (norm + COSINE_EPS);
        for (j, v) in row.iter().enumerate() {
            normed[i * d + j] = v * r;
        }
    }
    let normed = Values::matrix(n, d, normed);
    let out = values::matmul_nt(&normed, &normed);
    let normed = Arc::new(normed);
    Ok(finish(tape, || Rule::CosineMatrix { z: ArgRef::of(z), normed, norms }, out))
}

/// Symmetric degree normalization of a non-negative square matrix:
/// `L = D^{-1/2} A D^{-1/2}` with `D` the diagonal of row sums.
///
/// Degrees are floored at [`DEGREE_EPS`]; in the model the diagonal of `A`
/// keeps every degree near or above 1, so the floor never binds there.
pub fn degree_normalize(a: &Tensor) -> Result<Tensor, AdError> {
    if a.vals().ndim() != 2 || a.shape()[0] != a.shape()[1] {
        return Err(shape_err("degree_normalize", format!("{:?} is not square", a.shape())));
    }
    let n = a.shape()[0];
    let tape = joint_tape("degree_normalize", &[a])?;
    let ad = a.data();
    let mut scale = vec![0.0; n];
    for i in 0..n {
        let degree: f64 = ad[i * n..(i + 1) * n].iter().sum();
        scale[i] = 1.0 / degree.max(DEGREE_EPS).sqrt();
    }
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = ad[i * n + j] * scale[i] * scale[j];
        }
    }
    let out = Values::matrix(n, n, out);
    Ok(finish(tape, || Rule::DegreeNormalize { a: ArgRef::of(a), scale }, out))
}

// ---------------------------------------------------------------------------
// structural ops
// ---------------------------------------------------------------------------

/// Stack 2-D tensors with equal column counts on top of each other.
pub fn concat_rows(parts: &[&Tensor]) -> Result<Tensor, AdError> {
    if parts.is_empty() {
        return Err(shape_err("concat", "no inputs".to_string()));
    }
    let cols = parts[0].shape().last().copied().unwrap_or(0);
    let mut rows = 0;
    for p in parts {
        if p.vals().ndim() != 2 || p.shape()[1] != cols {
            return Err(shape_err("concat", format!("{:?} vs {cols} columns", p.shape())));
        }
        rows += p.shape()[0];
    }
    let tape = joint_tape("concat", parts)?;
    let mut data = Vec::with_capacity(rows * cols);
    for p in parts {
        data.extend_from_slice(p.data());
    }
    let out = Values::matrix(rows, cols, data);
    let spans: Vec<(Option<usize>, usize)> = parts.iter().map(|p| (p.node_id(), p.shape()[0])).collect();
    Ok(finish(tape, || Rule::ConcatRows { parts: spans, cols }, out))
}

/// Contiguous row range `[start, start+len)` of a 2-D tensor.
pub fn slice_rows(x: &Tensor, start: usize, len: usize) -> Result<Tensor, AdError> {
    if x.vals().ndim() != 2 || start + len > x.shape()[0] {
        return Err(shape_err("slice", format!("rows {start}..{} of {:?}", start + len, x.shape())));
    }
    let cols = x.shape()[1];
    let tape = joint_tape("slice", &[x])?;
    let data = x.data()[start * cols..(start + len) * cols].to_vec();
    let out = Values::matrix(len, cols, data);
    let in_shape = x.shape().to_vec();
    Ok(finish(tape, || Rule::SliceRows { x: x.node_id(), start, in_shape }, out))
}

/// Gather rows of an embedding table `[vocab, dim]` by token id.
pub fn embedding(table: &Tensor, ids: &[usize]) -> Result<Tensor, AdError> {
    if table.vals().ndim() != 2 {
        return Err(shape_err("embedding", format!("table {:?}", table.shape())));
    }
    let (vocab, dim) = (table.shape()[0], table.shape()[1]);
    for &id in ids {
        if id >= vocab {
            return Err(AdError::IndexOutOfRange { op: "embedding", index: id, bound: vocab });
        }
    }
    let tape = joint_tape("embedding", &[table])?;
    let mut data = Vec::with_capacity(ids.len() * dim);
    for &id in ids {
        data.extend_from_slice(table.vals().row(id));
    }
    let out = Values::matrix(ids.len(), dim, data);
    let ids = ids.to_vec();
    let table_shape = table.shape().to_vec();
    Ok(finish(tape, || Rule::Embedding { table: table.node_id(), ids, table_shape }, out))
}

/// Reinterpret a tensor with a new shape of equal total length.
pub fn reshape(x: &Tensor, shape: Vec<usize>) -> Result<Tensor, AdError> {
    if shape.iter().product::<usize>() != x.vals().len() {
        return Err(shape_err("reshape", format!("{:?} -> {:?}", x.shape(), shape)));
    }
    let tape = joint_tape("reshape", &[x])?;
    let out = Values::new(shape, x.data().to_vec());
    let in_shape = x.shape().to_vec();
    Ok(finish(tape, || Rule::Reshape { x: x.node_id(), in_shape }, out))
}

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

/// Mean binary cross-entropy of predicted probabilities against labels of
/// the same shape. Probabilities are clamped to [[`BCE_CLAMP`], 1−clamp].
pub fn bce_mean(p: &Tensor, labels: &Tensor) -> Result<Tensor, AdError> {
    if p.shape() != labels.shape() || p.vals().is_empty() {
        return Err(shape_err("bce_mean", format!("{:?} vs {:?}", p.shape(), labels.shape())));
    }
    let tape = joint_tape("bce_mean", &[p, labels])?;
    let n = p.vals().len() as f64;
    let mut total = 0.0;
    for (&pv, &y) in p.data().iter().zip(labels.data()) {
        let pc = pv.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        total -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
    }
    let out = Values::scalar(total / n);
    let labels_arc = Arc::clone(labels.vals_arc());
    Ok(finish(tape, || Rule::BceMean { p: ArgRef::of(p), labels: labels_arc }, out))
}

/// Sum of squared entries, as a scalar. The L2 penalty building block.
pub fn sum_sq(x: &Tensor) -> Result<Tensor, AdError> {
    let tape = joint_tape("sum_sq", &[x])?;
    let out = Values::scalar(x.data().iter().map(|v| v * v).sum());
    Ok(finish(tape, || Rule::SumSq { x: ArgRef::of(x) }, out))
}

// ---------------------------------------------------------------------------
// backward rules
// ---------------------------------------------------------------------------

impl Rule {
    pub(super) fn backward(&self, grad: &Values, bufs: &mut [Option<Values>]) {
        match self {
            Rule::Leaf => {}
            Rule::Matmul { a, b } => {
                if let Some(id) = a.id {
                    add_grad(bufs, id, values::matmul_nt(grad, &b.vals));
                }
                if let Some(id) = b.id {
                    add_grad(bufs, id, values::matmul_tn(&a.vals, grad));
                }
            }
            Rule::Add { a, b } => {
                if let Some(id) = a {
                    add_grad(bufs, *id, grad.clone());
                }
                if let Some(id) = b {
                    add_grad(bufs, *id, grad.clone());
                }
            }
            Rule::AddBias { x, b } => {
                if let Some(id) = x {
                    add_grad(bufs, *id, grad.clone());
                }
                if let Some(id) = b {
                    let (r, c) = (grad.rows(), grad.cols());
                    let mut db = vec![0.0; c];
                    for row in 0..r {
                        for col in 0..c {
                            db[col] += grad.at2(row, col);
                        }
                    }
                    add_grad(bufs, *id, Values::vector(db));
                }
            }
            Rule::Scale { x, factor } => {
                if let Some(id) = x {
                    let data = grad.data().iter().map(|g| g * factor).collect();
                    add_grad(bufs, *id, Values::new(grad.shape().to_vec(), data));
                }
            }
            Rule::Relu { x } => {
                if let Some(id) = x.id {
                    let data = grad
                        .data()
                        .iter()
                        .zip(x.vals.data())
                        .map(|(g, &v)| if v > 0.0 { *g } else { 0.0 })
                        .collect();
                    add_grad(bufs, id, Values::new(grad.shape().to_vec(), data));
                }
            }
            Rule::Sigmoid { x, y } => {
                if let Some(id) = x {
                    let data = grad
                        .data()
                        .iter()
                        .zip(y.data())
                        .map(|(g, &s)| g * s * (1.0 - s))
                        .collect();
                    add_grad(bufs, *id, Values::new(grad.shape().to_vec(), data));
                }
            }
            Rule::Mul { a, b } => {
                if let Some(id) = a.id {
                    let data = grad.data().iter().zip(b.vals.data()).map(|(g, v)| g * v).collect();
                    add_grad(bufs, id, Values::new(grad.shape().to_vec(), data));
                }
                if let Some(id) = b.id {
                    let data = grad.data().iter().zip(a.vals.data()).map(|(g, v)| g * v).collect();
                    add_grad(bufs, id, Values::new(grad.shape().to_vec(), data));
                }
            }
            Rule::Conv1d { x, kernel } => {
                let (bsz, len, cin) = (x.vals.shape()[0], x.vals.shape()[1], x.vals.shape()[2]);
                let (width, _, cout) = (kernel.vals.shape()[0], kernel.vals.shape()[1], kernel.vals.shape()[2]);
                let pad = (width - 1) / 2;
                let gd = grad.data();
                let xd = x.vals.data();
                let kd = kernel.vals.data();
                let mut dx = x.id.map(|_| vec![0.0; bsz * len * cin]);
                let mut dk = kernel.id.map(|_| vec![0.0; width * cin * cout]);
                for b in 0..bsz {
                    for t in 0..len {
                        let g_base = (b * len + t) * cout;
                        for dkw in 0..width {
                            let s = t + dkw;
                            if s < pad || s - pad >= len {
                                continue;
                            }
                            let s = s - pad;
                            let x_base = (b * len + s) * cin;
                            let k_base = dkw * cin * cout;
                            for ci in 0..cin {
                                let g_row = &gd[g_base..g_base + cout];
                                if let Some(dx) = dx.as_mut() {
                                    let k_row = &kd[k_base + ci * cout..k_base + (ci + 1) * cout];
                                    let mut acc = 0.0;
                                    for (g, kv) in g_row.iter().zip(k_row) {
                                        acc += g * kv;
                                    }
                                    dx[x_base + ci] += acc;
                                }
                                if let Some(dk) = dk.as_mut() {
                                    let xv = xd[x_base + ci];
                                    if xv != 0.0 {
                                        let dk_row = &mut dk[k_base + ci * cout..k_base + (ci + 1) * cout];
                                        for (d, g) in dk_row.iter_mut().zip(g_row) {
                                            *d += xv * g;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                if let (Some(id), Some(dx)) = (x.id, dx) {
                    add_grad(bufs, id, Values::new(vec![bsz, len, cin], dx));
                }
                if let (Some(id), Some(dk)) = (kernel.id, dk) {
                    add_grad(bufs, id, Values::new(vec![width, cin, cout], dk));
                }
            }
            Rule::GlobalMaxPool { x, argmax, in_shape } => {
                if let Some(id) = x {
                    let (bsz, len, ch) = (in_shape[0], in_shape[1], in_shape[2]);
                    let mut dx = vec![0.0; bsz * len * ch];
                    for b in 0..bsz {
                        for c in 0..ch {
                            let t = argmax[b * ch + c];
                            dx[(b * len + t) * ch + c] += grad.at2(b, c);
                        }
                    }
                    add_grad(bufs, *id, Values::new(in_shape.clone(), dx));
                }
            }
            Rule::BatchNormTrain { x, gamma, beta, xhat, inv_std } => {
                let (bsz, feats) = (xhat.rows(), xhat.cols());
                let gd = grad.data();
                let hd = xhat.data();
                if let Some(id) = beta {
                    let mut db = vec![0.0; feats];
                    for row in 0..bsz {
                        for f in 0..feats {
                            db[f] += gd[row * feats + f];
                        }
                    }
                    add_grad(bufs, *id, Values::vector(db));
                }
                if let Some(id) = gamma.id {
                    let mut dg = vec![0.0; feats];
                    for row in 0..bsz {
                        for f in 0..feats {
                            dg[f] += gd[row * feats + f] * hd[row * feats + f];
                        }
                    }
                    add_grad(bufs, id, Values::vector(dg));
                }
                if let Some(id) = x {
                    // dL/dx via the batch-coupled normalization derivative.
                    let gvals = gamma.vals.data();
                    let mut sum_dh = vec![0.0; feats];
                    let mut sum_dh_h = vec![0.0; feats];
                    for row in 0..bsz {
                        for f in 0..feats {
                            let dh = gd[row * feats + f] * gvals[f];
                            sum_dh[f] += dh;
                            sum_dh_h[f] += dh * hd[row * feats + f];
                        }
                    }
                    let nb = bsz as f64;
                    let mut dx = vec![0.0; bsz * feats];
                    for row in 0..bsz {
                        for f in 0..feats {
                            let dh = gd[row * feats + f] * gvals[f];
                            dx[row * feats + f] = inv_std[f] / nb
                                * (nb * dh - sum_dh[f] - hd[row * feats + f] * sum_dh_h[f]);
                        }
                    }
                    add_grad(bufs, *id, Values::matrix(bsz, feats, dx));
                }
            }
            Rule::BatchNormInfer { x, gamma, beta, xhat, inv_std } => {
                let (bsz, feats) = (xhat.rows(), xhat.cols());
                let gd = grad.data();
                let hd = xhat.data();
                if let Some(id) = beta {
                    let mut db = vec![0.0; feats];
                    for row in 0..bsz {
                        for f in 0..feats {
                            db[f] += gd[row * feats + f];
                        }
                    }
                    add_grad(bufs, *id, Values::vector(db));
                }
                if let Some(id) = gamma.id {
                    let mut dg = vec![0.0; feats];
                    for row in 0..bsz {
                        for f in 0..feats {
                            dg[f] += gd[row * feats + f] * hd[row * feats + f];
                        }
                    }
                    add_grad(bufs, id, Values::vector(dg));
                }
                if let Some(id) = x {
                    let gvals = gamma.vals.data();
                    let mut dx = vec![0.0; bsz * feats];
                    for row in 0..bsz {
                        for f in 0..feats {
                            dx[row * feats + f] = gd[row * feats + f] * gvals[f] * inv_std[f];
                        }
                    }
                    add_grad(bufs, *id, Values::matrix(bsz, feats, dx));
                }
            }
            Rule::Dropout { x, mask } => {
                if let Some(id) = x {
                    let data = grad.data().iter().zip(mask.data()).map(|(g, m)| g * m).collect();
                    add_grad(bufs, *id, Values::new(grad.shape().to_vec(), data));
                }
            }
            Rule::CosineMatrix { z, normed, norms } => {
                if let Some(id) = z.id {
                    let (n, d) = (normed.rows(), normed.cols());
                    // dL/dn_i = sum_j (G_ij + G_ji) n_j, then pull back through
                    // the guarded normalization n = z / (|z| + eps).
                    let mut gsym = Values::zeros(vec![n, n]);
                    for i in 0..n {
                        for j in 0..n {
                            gsym.set2(i, j, grad.at2(i, j) + grad.at2(j, i));
                        }
                    }
                    let gn = values::matmul(&gsym, normed);
                    let zd = z.vals.data();
                    let mut dz = vec![0.0; n * d];
                    for i in 0..n {
                        let r = 1.0 / (norms[i] + COSINE_EPS);
                        let g_row = gn.row(i);
                        let z_row = &zd[i * d..(i + 1) * d];
                        let g_dot_z: f64 = g_row.iter().zip(z_row).map(|(g, zv)| g * zv).sum();
                        let shrink = if norms[i] > 0.0 { g_dot_z * r * r / norms[i] } else { 0.0 };
                        for k in 0..d {
                            dz[i * d + k] = r * g_row[k] - shrink * z_row[k];
                        }
                    }
                    add_grad(bufs, id, Values::matrix(n, d, dz));
                }
            }
            Rule::DegreeNormalize { a, scale } => {
                if let Some(id) = a.id {
                    let n = scale.len();
                    let ad = a.vals.data();
                    // Degrees are row sums, so perturbing A[k][l] moves only
                    // d_k — which appears in row k (through s_i) and column k
                    // (through s_j). Aggregate both occurrences per k.
                    let mut row_agg = vec![0.0; n];
                    let mut col_agg = vec![0.0; n];
                    for i in 0..n {
                        for j in 0..n {
                            let gaw = grad.at2(i, j) * ad[i * n + j];
                            row_agg[i] += gaw * scale[j];
                            col_agg[j] += gaw * scale[i];
                        }
                    }
                    let mut da = vec![0.0; n * n];
                    for k in 0..n {
                        let sk3 = scale[k] * scale[k] * scale[k];
                        let degree_term = 0.5 * sk3 * (row_agg[k] + col_agg[k]);
                        for l in 0..n {
                            da[k * n + l] = grad.at2(k, l) * scale[k] * scale[l] - degree_term;
                        }
                    }
                    add_grad(bufs, id, Values::matrix(n, n, da));
                }
            }
            Rule::ConcatRows { parts, cols } => {
                let mut start = 0;
                for (id, rows) in parts {
                    if let Some(id) = id {
                        let data = grad.data()[start * cols..(start + rows) * cols].to_vec();
                        add_grad(bufs, *id, Values::matrix(*rows, *cols, data));
                    }
                    start += rows;
                }
            }
            Rule::SliceRows { x, start, in_shape } => {
                if let Some(id) = x {
                    let cols = in_shape[1];
                    let mut dx = Values::zeros(in_shape.clone());
                    let base = start * cols;
                    dx.data_mut()[base..base + grad.len()].copy_from_slice(grad.data());
                    add_grad(bufs, *id, dx);
                }
            }
            Rule::Embedding { table, ids, table_shape } => {
                if let Some(id) = table {
                    let dim = table_shape[1];
                    let mut dt = Values::zeros(table_shape.clone());
                    for (row, &tok) in ids.iter().enumerate() {
                        let dst = &mut dt.data_mut()[tok * dim..(tok + 1) * dim];
                        for (d, g) in dst.iter_mut().zip(grad.row(row)) {
                            *d += g;
                        }
                    }
                    add_grad(bufs, *id, dt);
                }
            }
            Rule::Reshape { x, in_shape } => {
                if let Some(id) = x {
                    add_grad(bufs, *id, grad.reshaped(in_shape.clone()));
                }
            }
            Rule::BceMean { p, labels } => {
                if let Some(id) = p.id {
                    let n = p.vals.len() as f64;
                    let g = grad.item();
                    let data = p
                        .vals
                        .data()
                        .iter()
                        .zip(labels.data())
                        .map(|(&pv, &y)| {
                            if pv > BCE_CLAMP && pv < 1.0 - BCE_CLAMP {
                                g / n * (-y / pv + (1.0 - y) / (1.0 - pv))
                            } else {
                                0.0 // clamped region: locally constant
                            }
                        })
                        .collect();
                    add_grad(bufs, id, Values::new(p.vals.shape().to_vec(), data));
                }
            }
            Rule::SumSq { x } => {
                if let Some(id) = x.id {
                    let g = grad.item();
                    let data = x.vals.data().iter().map(|v| 2.0 * g * v).collect();
                    add_grad(bufs, id, Values::new(x.vals.shape().to_vec(), data));
                }
            }
        }
    }
}
