//! Reverse-mode tape: tracked tensors, the operation record, and the
//! backward sweep.
//!
//! A [`Tape`] owns an append-only list of nodes. Each op pushes one node
//! holding whatever the backward rule needs (parent ids plus saved values).
//! [`Tape::backward`] walks the list once in reverse, accumulating gradients
//! into per-node buffers and freeing each buffer as soon as its node has been
//! processed, so peak memory stays proportional to the widest layer rather
//! than the whole graph.
//!
//! Single-threaded by design: the tape is `Rc<RefCell<...>>` and tensors are
//! cheap handles (`Arc` around the value block plus an optional node id).

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use super::ops::Rule;
use super::values::Values;
use super::AdError;

/// A value block plus an optional position on a tape.
///
/// Tensors without a node are constants: gradients never flow into them.
#[derive(Clone)]
pub struct Tensor {
    vals: Arc<Values>,
    node: Option<(Tape, usize)>,
}

impl Tensor {
    /// An untracked constant.
    pub fn constant(vals: Values) -> Self {
        Tensor { vals: Arc::new(vals), node: None }
    }

    /// An untracked constant sharing an existing value block.
    pub fn constant_arc(vals: Arc<Values>) -> Self {
        Tensor { vals, node: None }
    }

    pub fn vals(&self) -> &Values {
        &self.vals
    }

    pub fn vals_arc(&self) -> &Arc<Values> {
        &self.vals
    }

    pub fn shape(&self) -> &[usize] {
        self.vals.shape()
    }

    pub fn data(&self) -> &[f64] {
        self.vals.data()
    }

    pub fn item(&self) -> f64 {
        self.vals.item()
    }

    /// Whether gradients will flow into or through this tensor.
    pub fn requires_grad(&self) -> bool {
        self.node.is_some()
    }

    pub fn node_id(&self) -> Option<usize> {
        self.node.as_ref().map(|(_, id)| *id)
    }

    pub fn tape(&self) -> Option<&Tape> {
        self.node.as_ref().map(|(t, _)| t)
    }

    /// Same values, detached from any tape.
    pub fn detached(&self) -> Tensor {
        Tensor { vals: Arc::clone(&self.vals), node: None }
    }

    pub(super) fn tracked_arc(vals: Arc<Values>, tape: Tape, id: usize) -> Self {
        Tensor { vals, node: Some((tape, id)) }
    }
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tensor({:?}, node={:?})", self.vals, self.node_id())
    }
}

pub(super) struct Node {
    pub rule: Rule,
}

struct TapeInner {
    nodes: Vec<Node>,
    /// Memoizes leaves by the address of their value block so registering the
    /// same parameter twice yields the same node.
    leaves: HashMap<usize, usize>,
    consumed: bool,
}

/// Recording context for one forward/backward round trip.
#[derive(Clone)]
pub struct Tape(Rc<RefCell<TapeInner>>);

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape(Rc::new(RefCell::new(TapeInner {
            nodes: Vec::new(),
            leaves: HashMap::new(),
            consumed: false,
        })))
    }

    pub fn same_tape(&self, other: &Tape) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }

    pub fn len(&self) -> usize {
        self.0.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Register a parameter. Calling again with the same `Arc` returns a
    /// handle to the existing node, so gradients accumulate in one place.
    pub fn leaf(&self, vals: &Arc<Values>) -> Tensor {
        let key = Arc::as_ptr(vals) as usize;
        let mut inner = self.0.borrow_mut();
        if let Some(&id) = inner.leaves.get(&key) {
            return Tensor::tracked_arc(Arc::clone(vals), self.clone(), id);
        }
        let id = inner.nodes.len();
        inner.nodes.push(Node { rule: Rule::Leaf });
        inner.leaves.insert(key, id);
        Tensor::tracked_arc(Arc::clone(vals), self.clone(), id)
    }

    /// Node id previously assigned to this parameter, if it was registered.
    pub fn leaf_id(&self, vals: &Arc<Values>) -> Option<usize> {
        let key = Arc::as_ptr(vals) as usize;
        self.0.borrow().leaves.get(&key).copied()
    }

    pub(super) fn push(&self, rule: Rule, out: Values) -> Tensor {
        self.push_arc(rule, Arc::new(out))
    }

    /// Record a node whose output block is already shared (e.g. an op that
    /// saves its own output for backward).
    pub(super) fn push_arc(&self, rule: Rule, out: Arc<Values>) -> Tensor {
        let mut inner = self.0.borrow_mut();
        let id = inner.nodes.len();
        inner.nodes.push(Node { rule });
        drop(inner);
        Tensor::tracked_arc(out, self.clone(), id)
    }

    /// Run the backward sweep from a scalar output.
    ///
    /// Consumes the tape logically: a second call returns
    /// [`AdError::TapeConsumed`]. Saved forward values stay alive until the
    /// tape itself is dropped.
    pub fn backward(&self, out: &Tensor) -> Result<Gradients, AdError> {
        let out_id = match &out.node {
            Some((tape, id)) if tape.same_tape(self) => *id,
            Some(_) => return Err(AdError::MixedTapes { op: "backward" }),
            None => return Err(AdError::UntrackedBackward),
        };
        if out.vals.len() != 1 {
            return Err(AdError::NonScalarBackward { shape: out.shape().to_vec() });
        }
        let mut inner = self.0.borrow_mut();
        if inner.consumed {
            return Err(AdError::TapeConsumed);
        }
        inner.consumed = true;

        let n = inner.nodes.len();
        let mut bufs: Vec<Option<Values>> = (0..n).map(|_| None).collect();
        bufs[out_id] = Some(Values::scalar(1.0));

        for id in (0..=out_id).rev() {
            if bufs[id].is_none() {
                continue;
            }
            if matches!(inner.nodes[id].rule, Rule::Leaf) {
                continue; // keep the buffer; it is the result
            }
            let grad = bufs[id].take().expect("buffer checked above");
            inner.nodes[id].rule.backward(&grad, &mut bufs);
        }

        let leaf_ids: Vec<usize> = inner.leaves.values().copied().collect();
        let mut grads: Vec<Option<Values>> = (0..n).map(|_| None).collect();
        for id in leaf_ids {
            grads[id] = bufs[id].take();
        }
        Ok(Gradients { by_node: grads })
    }
}

/// Leaf gradients produced by one backward sweep, indexed by node id.
pub struct Gradients {
    by_node: Vec<Option<Values>>,
}

impl Gradients {
    /// Gradient for a leaf node, `None` if no gradient reached it.
    pub fn get(&self, node_id: usize) -> Option<&Values> {
        self.by_node.get(node_id).and_then(|g| g.as_ref())
    }

    /// Remove and return the gradient for a leaf node.
    pub fn take(&mut self, node_id: usize) -> Option<Values> {
        self.by_node.get_mut(node_id).and_then(|g| g.take())
    }

    /// Gradient for a tracked tensor (usually a leaf returned by
    /// [`Tape::leaf`]).
    pub fn for_tensor(&self, t: &Tensor) -> Option<&Values> {
        t.node_id().and_then(|id| self.get(id))
    }
}

/// Add `src` into the buffer for node `id`, allocating it on first touch.
pub(super) fn add_grad(bufs: &mut [Option<Values>], id: usize, src: Values) {
    match &mut bufs[id] {
        Some(buf) => super::values::accumulate(buf, &src),
        slot @ None => *slot = Some(src),
    }
}
