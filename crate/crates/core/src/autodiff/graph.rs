//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] owns every tensor produced during a forward pass. Node ids
//! are handed out in construction order, which is already a topological
//! order, so [`Graph::backward`] is a single reverse sweep that visits
//! each node exactly once. A graph is confined to one thread.
//!
//! Reductions with an axis argument keep that axis with extent 1 so the
//! result broadcasts back against its input. Elementwise binary ops
//! broadcast right-aligned (an extent-1 axis stretches to match).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
// Needed for f64 math in pure no_std builds; redundant when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

use super::tensor::{strides_of, TensorData};

pub type TensorId = usize;

const LAYER_NORM_EPS: f64 = 1e-5;

/// Errors raised while building or differentiating a graph.
#[derive(Debug, Clone, PartialEq)]
pub enum AdError {
    ShapeMismatch { op: &'static str, detail: String },
    NonFinite { op: &'static str },
    /// backward was asked for a non-scalar loss.
    NotScalar,
    /// The loss has no gradient path to any differentiable leaf.
    DisconnectedGraph,
    IndexOutOfBounds { op: &'static str, index: usize, bound: usize },
    NotALeaf,
}

impl core::fmt::Display for AdError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::ShapeMismatch { op, detail } => write!(f, "{op}: shape mismatch: {detail}"),
            Self::NonFinite { op } => write!(f, "{op}: non-finite value in output"),
            Self::NotScalar => write!(f, "backward requires a scalar loss"),
            Self::DisconnectedGraph => write!(f, "loss is not connected to any differentiable leaf"),
            Self::IndexOutOfBounds { op, index, bound } => {
                write!(f, "{op}: index {index} out of bounds for extent {bound}")
            }
            Self::NotALeaf => write!(f, "value assignment is only allowed on leaf nodes"),
        }
    }
}

impl core::error::Error for AdError {}

type Result<T> = core::result::Result<T, AdError>;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(TensorId, TensorId),
    Sub(TensorId, TensorId),
    Mul(TensorId, TensorId),
    Div(TensorId, TensorId),
    AddScalar(TensorId, f64),
    MulScalar(TensorId, f64),
    Matmul(TensorId, TensorId),
    Transpose(TensorId),
    Reshape(TensorId, Vec<usize>),
    Concat(Vec<TensorId>, usize),
    SliceLast(TensorId, usize, usize),
    Gather(TensorId, Vec<usize>),
    ScatterAdd(TensorId, Vec<usize>, usize),
    SumAxis(TensorId, usize),
    SumAll(TensorId),
    MeanAxis(TensorId, usize),
    MeanAll(TensorId),
    Relu(TensorId),
    Sigmoid(TensorId),
    Tanh(TensorId),
    Softmax(TensorId, usize),
    LayerNorm { x: TensorId, gamma: TensorId, beta: TensorId },
    Sqrt(TensorId),
    Square(TensorId),
    Exp(TensorId),
    Log(TensorId),
    NormAxis(TensorId, usize),
    Cross(TensorId, TensorId),
    Atan2(TensorId, TensorId),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::AddScalar(..) => "add_scalar",
            Op::MulScalar(..) => "mul_scalar",
            Op::Matmul(..) => "matmul",
            Op::Transpose(..) => "transpose",
            Op::Reshape(..) => "reshape",
            Op::Concat(..) => "concat",
            Op::SliceLast(..) => "slice_last",
            Op::Gather(..) => "gather",
            Op::ScatterAdd(..) => "scatter_add",
            Op::SumAxis(..) => "sum_axis",
            Op::SumAll(..) => "sum_all",
            Op::MeanAxis(..) => "mean_axis",
            Op::MeanAll(..) => "mean_all",
            Op::Relu(..) => "relu",
            Op::Sigmoid(..) => "sigmoid",
            Op::Tanh(..) => "tanh",
            Op::Softmax(..) => "softmax",
            Op::LayerNorm { .. } => "layer_norm",
            Op::Sqrt(..) => "sqrt",
            Op::Square(..) => "square",
            Op::Exp(..) => "exp",
            Op::Log(..) => "log",
            Op::NormAxis(..) => "norm_axis",
            Op::Cross(..) => "cross",
            Op::Atan2(..) => "atan2",
        }
    }

    fn parents(&self) -> Vec<TensorId> {
        match self {
            Op::Leaf => vec![],
            Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::Div(a, b)
            | Op::Matmul(a, b)
            | Op::Cross(a, b)
            | Op::Atan2(a, b) => vec![*a, *b],
            Op::AddScalar(a, _)
            | Op::MulScalar(a, _)
            | Op::Transpose(a)
            | Op::Reshape(a, _)
            | Op::SliceLast(a, _, _)
            | Op::Gather(a, _)
            | Op::ScatterAdd(a, _, _)
            | Op::SumAxis(a, _)
            | Op::SumAll(a)
            | Op::MeanAxis(a, _)
            | Op::MeanAll(a)
            | Op::Relu(a)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Softmax(a, _)
            | Op::Sqrt(a)
            | Op::Square(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::NormAxis(a, _) => vec![*a],
            Op::Concat(parts, _) => parts.clone(),
            Op::LayerNorm { x, gamma, beta } => vec![*x, *gamma, *beta],
        }
    }
}

struct Node {
    value: TensorData,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
    op: Op,
}

/// A single-threaded computation tape.
pub struct Graph {
    nodes: Vec<Node>,
    check_finite: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

// ---------------------------------------------------------------------------
// broadcasting helpers

fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0usize; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() { 1 } else { a[i - (rank - a.len())] };
        let db = if i < rank - b.len() { 1 } else { b[i - (rank - b.len())] };
        out[i] = if da == db {
            da
        } else if da == 1 {
            db
        } else if db == 1 {
            da
        } else {
            return None;
        };
    }
    Some(out)
}

/// Strides of `shape` aligned to `out_shape`'s rank, with stride 0 on
/// broadcast axes.
fn aligned_strides(shape: &[usize], out_shape: &[usize]) -> Vec<usize> {
    let rank = out_shape.len();
    let offset = rank - shape.len();
    let s = strides_of(shape);
    let mut out = vec![0usize; rank];
    for i in 0..shape.len() {
        out[offset + i] = if shape[i] == 1 && out_shape[offset + i] != 1 { 0 } else { s[i] };
    }
    out
}

/// Walk every element of `out_shape` in row-major order, calling
/// `f(out_off, a_off, b_off)` with the matching (broadcast) input offsets.
fn for_each_broadcast2(
    out_shape: &[usize],
    a_shape: &[usize],
    b_shape: &[usize],
    mut f: impl FnMut(usize, usize, usize),
) {
    let rank = out_shape.len();
    let a_str = aligned_strides(a_shape, out_shape);
    let b_str = aligned_strides(b_shape, out_shape);
    let total: usize = out_shape.iter().product();
    let mut counters = vec![0usize; rank];
    let (mut a_off, mut b_off) = (0usize, 0usize);
    for out_off in 0..total {
        f(out_off, a_off, b_off);
        for ax in (0..rank).rev() {
            counters[ax] += 1;
            a_off += a_str[ax];
            b_off += b_str[ax];
            if counters[ax] < out_shape[ax] {
                break;
            }
            counters[ax] = 0;
            a_off -= a_str[ax] * out_shape[ax];
            b_off -= b_str[ax] * out_shape[ax];
        }
    }
}

/// Split a shape at `axis` into (outer, extent, inner) products.
fn lanes(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer: usize = shape[..axis].iter().product();
    let extent = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, extent, inner)
}

// ---------------------------------------------------------------------------

impl Graph {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            check_finite: false,
        }
    }

    /// Enable or disable the non-finite output check on every op
    /// (training mode).
    pub fn set_check_finite(&mut self, on: bool) {
        self.check_finite = on;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Insert a differentiable leaf.
    pub fn leaf(&mut self, value: TensorData) -> TensorId {
        self.push_leaf(value, true)
    }

    /// Insert a non-differentiable leaf.
    pub fn constant(&mut self, value: TensorData) -> TensorId {
        self.push_leaf(value, false)
    }

    pub fn scalar_constant(&mut self, v: f64) -> TensorId {
        self.constant(TensorData::scalar(v))
    }

    fn push_leaf(&mut self, value: TensorData, requires_grad: bool) -> TensorId {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op: Op::Leaf,
        });
        self.nodes.len() - 1
    }

    pub fn value(&self, id: TensorId) -> &TensorData {
        &self.nodes[id].value
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.nodes[id].value.shape
    }

    pub fn grad(&self, id: TensorId) -> Option<&[f64]> {
        self.nodes[id].grad.as_deref()
    }

    pub fn requires_grad(&self, id: TensorId) -> bool {
        self.nodes[id].requires_grad
    }

    pub fn is_leaf(&self, id: TensorId) -> bool {
        matches!(self.nodes[id].op, Op::Leaf)
    }

    /// Replace a leaf's value (shape must match), e.g. for re-running the
    /// same graph on perturbed inputs via [`Graph::refresh`].
    pub fn set_leaf_value(&mut self, id: TensorId, value: TensorData) -> Result<()> {
        let node = &mut self.nodes[id];
        if !matches!(node.op, Op::Leaf) {
            return Err(AdError::NotALeaf);
        }
        if node.value.shape != value.shape {
            return Err(AdError::ShapeMismatch {
                op: "set_leaf_value",
                detail: format!("{:?} vs {:?}", node.value.shape, value.shape),
            });
        }
        node.value = value;
        Ok(())
    }

    /// Recompute every non-leaf value in topological order. The graph
    /// structure (including any constants captured at build time) is
    /// unchanged.
    pub fn refresh(&mut self) -> Result<()> {
        for i in 0..self.nodes.len() {
            if matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            let op = self.nodes[i].op.clone();
            let value = self.eval(&op);
            if self.check_finite && !value.all_finite() {
                return Err(AdError::NonFinite { op: op.name() });
            }
            self.nodes[i].value = value;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn push_op(&mut self, op: Op) -> Result<TensorId> {
        let requires_grad = op.parents().iter().any(|&p| self.nodes[p].requires_grad);
        let value = self.eval(&op);
        if self.check_finite && !value.all_finite() {
            return Err(AdError::NonFinite { op: op.name() });
        }
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Ok(self.nodes.len() - 1)
    }

    // -- binary elementwise --------------------------------------------------

    fn check_broadcast(&self, op: &'static str, a: TensorId, b: TensorId) -> Result<Vec<usize>> {
        broadcast_shape(self.shape(a), self.shape(b)).ok_or_else(|| AdError::ShapeMismatch {
            op,
            detail: format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
        })
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.check_broadcast("add", a, b)?;
        self.push_op(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.check_broadcast("sub", a, b)?;
        self.push_op(Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.check_broadcast("mul", a, b)?;
        self.push_op(Op::Mul(a, b))
    }

    pub fn div(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.check_broadcast("div", a, b)?;
        self.push_op(Op::Div(a, b))
    }

    pub fn add_scalar(&mut self, a: TensorId, c: f64) -> Result<TensorId> {
        self.push_op(Op::AddScalar(a, c))
    }

    pub fn mul_scalar(&mut self, a: TensorId, c: f64) -> Result<TensorId> {
        self.push_op(Op::MulScalar(a, c))
    }

    pub fn neg(&mut self, a: TensorId) -> Result<TensorId> {
        self.mul_scalar(a, -1.0)
    }

    // -- linear algebra -------------------------------------------------------

    /// Matrix product on the last two axes. Either both operands are rank
    /// 2, or they share identical leading (batch) dimensions.
    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let ok = sa.len() >= 2
            && sb.len() == sa.len()
            && sa[..sa.len() - 2] == sb[..sb.len() - 2]
            && sa[sa.len() - 1] == sb[sb.len() - 2];
        if !ok {
            return Err(AdError::ShapeMismatch {
                op: "matmul",
                detail: format!("{sa:?} x {sb:?}"),
            });
        }
        self.push_op(Op::Matmul(a, b))
    }

    /// Swap the last two axes.
    pub fn transpose(&mut self, a: TensorId) -> Result<TensorId> {
        if self.shape(a).len() < 2 {
            return Err(AdError::ShapeMismatch {
                op: "transpose",
                detail: format!("rank {} < 2", self.shape(a).len()),
            });
        }
        self.push_op(Op::Transpose(a))
    }

    pub fn reshape(&mut self, a: TensorId, shape: &[usize]) -> Result<TensorId> {
        if shape.iter().product::<usize>() != self.value(a).len() {
            return Err(AdError::ShapeMismatch {
                op: "reshape",
                detail: format!("{:?} -> {:?}", self.shape(a), shape),
            });
        }
        self.push_op(Op::Reshape(a, shape.to_vec()))
    }

    pub fn concat(&mut self, parts: &[TensorId], axis: usize) -> Result<TensorId> {
        if parts.is_empty() {
            return Err(AdError::ShapeMismatch {
                op: "concat",
                detail: "no inputs".into(),
            });
        }
        let first = self.shape(parts[0]).to_vec();
        if axis >= first.len() {
            return Err(AdError::ShapeMismatch {
                op: "concat",
                detail: format!("axis {axis} out of range for rank {}", first.len()),
            });
        }
        for &p in parts {
            let s = self.shape(p);
            let compatible = s.len() == first.len()
                && s.iter()
                    .zip(&first)
                    .enumerate()
                    .all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(AdError::ShapeMismatch {
                    op: "concat",
                    detail: format!("{s:?} vs {first:?} along axis {axis}"),
                });
            }
        }
        self.push_op(Op::Concat(parts.to_vec(), axis))
    }

    /// Slice `[start, start + len)` along the last axis.
    pub fn slice_last(&mut self, a: TensorId, start: usize, len: usize) -> Result<TensorId> {
        let s = self.shape(a);
        if s.is_empty() || start + len > s[s.len() - 1] {
            return Err(AdError::ShapeMismatch {
                op: "slice_last",
                detail: format!("[{start}, {}) of {:?}", start + len, s),
            });
        }
        self.push_op(Op::SliceLast(a, start, len))
    }

    /// Select rows (axis 0) of `a` by index; output has `indices.len()` rows.
    pub fn gather(&mut self, a: TensorId, indices: &[usize]) -> Result<TensorId> {
        let s = self.shape(a);
        if s.is_empty() {
            return Err(AdError::ShapeMismatch {
                op: "gather",
                detail: "rank 0 input".into(),
            });
        }
        let bound = s[0];
        if let Some(&bad) = indices.iter().find(|&&i| i >= bound) {
            return Err(AdError::IndexOutOfBounds {
                op: "gather",
                index: bad,
                bound,
            });
        }
        self.push_op(Op::Gather(a, indices.to_vec()))
    }

    /// Accumulate rows of `a` into `rows` output rows: `out[idx[e]] += a[e]`.
    pub fn scatter_add(&mut self, a: TensorId, indices: &[usize], rows: usize) -> Result<TensorId> {
        let s = self.shape(a);
        if s.is_empty() || s[0] != indices.len() {
            return Err(AdError::ShapeMismatch {
                op: "scatter_add",
                detail: format!("{} indices for shape {:?}", indices.len(), s),
            });
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(AdError::IndexOutOfBounds {
                op: "scatter_add",
                index: bad,
                bound: rows,
            });
        }
        self.push_op(Op::ScatterAdd(a, indices.to_vec(), rows))
    }

    // -- reductions -----------------------------------------------------------

    fn check_axis(&self, op: &'static str, a: TensorId, axis: usize) -> Result<()> {
        if axis >= self.shape(a).len() {
            return Err(AdError::ShapeMismatch {
                op,
                detail: format!("axis {axis} out of range for {:?}", self.shape(a)),
            });
        }
        Ok(())
    }

    /// Sum along `axis`, keeping it with extent 1.
    pub fn sum_axis(&mut self, a: TensorId, axis: usize) -> Result<TensorId> {
        self.check_axis("sum_axis", a, axis)?;
        self.push_op(Op::SumAxis(a, axis))
    }

    pub fn sum_all(&mut self, a: TensorId) -> Result<TensorId> {
        self.push_op(Op::SumAll(a))
    }

    /// Mean along `axis`, keeping it with extent 1.
    pub fn mean_axis(&mut self, a: TensorId, axis: usize) -> Result<TensorId> {
        self.check_axis("mean_axis", a, axis)?;
        self.push_op(Op::MeanAxis(a, axis))
    }

    pub fn mean_all(&mut self, a: TensorId) -> Result<TensorId> {
        self.push_op(Op::MeanAll(a))
    }

    /// Euclidean norm along `axis`, keeping it with extent 1.
    pub fn norm_axis(&mut self, a: TensorId, axis: usize) -> Result<TensorId> {
        self.check_axis("norm_axis", a, axis)?;
        self.push_op(Op::NormAxis(a, axis))
    }

    // -- activations / elementwise --------------------------------------------

    pub fn relu(&mut self, a: TensorId) -> Result<TensorId> {
        self.push_op(Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: TensorId) -> Result<TensorId> {
        self.push_op(Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: TensorId) -> Result<TensorId> {
        self.push_op(Op::Tanh(a))
    }

    pub fn sqrt(&mut self, a: TensorId) -> Result<TensorId> {
        self.push_op(Op::Sqrt(a))
    }

    pub fn square(&mut self, a: TensorId) -> Result<TensorId> {
        self.push_op(Op::Square(a))
    }

    pub fn exp(&mut self, a: TensorId) -> Result<TensorId> {
        self.push_op(Op::Exp(a))
    }

    pub fn log(&mut self, a: TensorId) -> Result<TensorId> {
        self.push_op(Op::Log(a))
    }

    pub fn softmax(&mut self, a: TensorId, axis: usize) -> Result<TensorId> {
        self.check_axis("softmax", a, axis)?;
        self.push_op(Op::Softmax(a, axis))
    }

    /// Normalize the last axis to zero mean / unit variance, then scale and
    /// shift: `gamma * xhat + beta`. `gamma` and `beta` have the extent of
    /// the last axis.
    pub fn layer_norm(&mut self, x: TensorId, gamma: TensorId, beta: TensorId) -> Result<TensorId> {
        let sx = self.shape(x);
        if sx.is_empty() {
            return Err(AdError::ShapeMismatch {
                op: "layer_norm",
                detail: "rank 0 input".into(),
            });
        }
        let d = sx[sx.len() - 1];
        if self.shape(gamma) != [d] || self.shape(beta) != [d] {
            return Err(AdError::ShapeMismatch {
                op: "layer_norm",
                detail: format!(
                    "gamma {:?} / beta {:?} for feature dim {d}",
                    self.shape(gamma),
                    self.shape(beta)
                ),
            });
        }
        self.push_op(Op::LayerNorm { x, gamma, beta })
    }

    /// Cross product of 3-vectors along the last axis; shapes must match.
    pub fn cross(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb || sa.is_empty() || sa[sa.len() - 1] != 3 {
            return Err(AdError::ShapeMismatch {
                op: "cross",
                detail: format!("{sa:?} x {sb:?}"),
            });
        }
        self.push_op(Op::Cross(a, b))
    }

    /// Elementwise `atan2(y, x)`; shapes must match.
    pub fn atan2(&mut self, y: TensorId, x: TensorId) -> Result<TensorId> {
        if self.shape(y) != self.shape(x) {
            return Err(AdError::ShapeMismatch {
                op: "atan2",
                detail: format!("{:?} vs {:?}", self.shape(y), self.shape(x)),
            });
        }
        self.push_op(Op::Atan2(y, x))
    }

    // -- forward evaluation -----------------------------------------------

    fn eval(&self, op: &Op) -> TensorData {
        let v = |id: TensorId| &self.nodes[id].value;
        match *op {
            Op::Leaf => unreachable!("leaves are never re-evaluated"),
            Op::Add(a, b) => eval_broadcast(v(a), v(b), |x, y| x + y),
            Op::Sub(a, b) => eval_broadcast(v(a), v(b), |x, y| x - y),
            Op::Mul(a, b) => eval_broadcast(v(a), v(b), |x, y| x * y),
            Op::Div(a, b) => eval_broadcast(v(a), v(b), |x, y| x / y),
            Op::AddScalar(a, c) => map_unary(v(a), |x| x + c),
            Op::MulScalar(a, c) => map_unary(v(a), |x| x * c),
            Op::Matmul(a, b) => eval_matmul(v(a), v(b)),
            Op::Transpose(a) => eval_transpose(v(a)),
            Op::Reshape(a, ref shape) => {
                let mut t = v(a).clone();
                t.shape = shape.clone();
                t
            }
            Op::Concat(ref parts, axis) => {
                let tensors: Vec<&TensorData> = parts.iter().map(|&p| v(p)).collect();
                eval_concat(&tensors, axis)
            }
            Op::SliceLast(a, start, len) => eval_slice_last(v(a), start, len),
            Op::Gather(a, ref idx) => eval_gather(v(a), idx),
            Op::ScatterAdd(a, ref idx, rows) => eval_scatter_add(v(a), idx, rows),
            Op::SumAxis(a, axis) => eval_reduce(v(a), axis, false),
            Op::MeanAxis(a, axis) => eval_reduce(v(a), axis, true),
            Op::SumAll(a) => TensorData::scalar(v(a).data.iter().sum()),
            Op::MeanAll(a) => {
                let t = v(a);
                TensorData::scalar(t.data.iter().sum::<f64>() / t.data.len() as f64)
            }
            Op::Relu(a) => map_unary(v(a), |x| if x > 0.0 { x } else { 0.0 }),
            Op::Sigmoid(a) => map_unary(v(a), |x| 1.0 / (1.0 + (-x).exp())),
            Op::Tanh(a) => map_unary(v(a), |x| x.tanh()),
            Op::Sqrt(a) => map_unary(v(a), |x| x.sqrt()),
            Op::Square(a) => map_unary(v(a), |x| x * x),
            Op::Exp(a) => map_unary(v(a), |x| x.exp()),
            Op::Log(a) => map_unary(v(a), |x| x.ln()),
            Op::Softmax(a, axis) => eval_softmax(v(a), axis),
            Op::LayerNorm { x, gamma, beta } => eval_layer_norm(v(x), v(gamma), v(beta)),
            Op::NormAxis(a, axis) => eval_norm(v(a), axis),
            Op::Cross(a, b) => eval_cross(v(a), v(b)),
            Op::Atan2(y, x) => {
                let (ty, tx) = (v(y), v(x));
                let data = ty
                    .data
                    .iter()
                    .zip(&tx.data)
                    .map(|(&yy, &xx)| yy.atan2(xx))
                    .collect();
                TensorData::new(&ty.shape, data)
            }
        }
    }

    // -- backward ---------------------------------------------------------

    /// Accumulate `d loss / d node` into every `requires_grad` node
    /// reachable from `loss`. Existing grads are kept (zero them first for
    /// a fresh pass); leaves' grads are then available via [`Graph::grad`].
    pub fn backward(&mut self, loss: TensorId) -> Result<()> {
        if self.nodes[loss].value.len() != 1 {
            return Err(AdError::NotScalar);
        }
        if !self.nodes[loss].requires_grad {
            return Err(AdError::DisconnectedGraph);
        }
        {
            let g = self.grad_slot(loss);
            g[0] += 1.0;
        }
        for i in (0..=loss).rev() {
            if self.nodes[i].grad.is_none() || !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(i);
        }
        Ok(())
    }

    fn grad_slot(&mut self, id: TensorId) -> &mut [f64] {
        let len = self.nodes[id].value.len();
        self.nodes[id].grad.get_or_insert_with(|| vec![0.0; len])
    }

    fn propagate(&mut self, i: TensorId) {
        let op = self.nodes[i].op.clone();
        if matches!(op, Op::Leaf) {
            return;
        }
        // Parents always precede their consumers, so split the tape.
        let (head, tail) = self.nodes.split_at_mut(i);
        let node = &tail[0];
        let dout = node.grad.as_ref().expect("propagate on grad-less node");
        let out = &node.value;
        // Lazily allocate a parent's grad buffer.
        macro_rules! pgrad {
            ($p:expr) => {{
                let pn = &mut head[$p];
                let len = pn.value.len();
                pn.grad.get_or_insert_with(|| vec![0.0; len])
            }};
        }
        macro_rules! needs {
            ($p:expr) => {
                head[$p].requires_grad
            };
        }

        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                if needs!(a) {
                    let sa = head[a].value.shape.clone();
                    backward_broadcast_into(&sa, &out.shape, dout, pgrad!(a), 1.0);
                }
                if needs!(b) {
                    let sb = head[b].value.shape.clone();
                    backward_broadcast_into(&sb, &out.shape, dout, pgrad!(b), 1.0);
                }
            }
            Op::Sub(a, b) => {
                if needs!(a) {
                    let sa = head[a].value.shape.clone();
                    backward_broadcast_into(&sa, &out.shape, dout, pgrad!(a), 1.0);
                }
                if needs!(b) {
                    let sb = head[b].value.shape.clone();
                    backward_broadcast_into(&sb, &out.shape, dout, pgrad!(b), -1.0);
                }
            }
            Op::Mul(a, b) => {
                let (sa, sb) = (head[a].value.shape.clone(), head[b].value.shape.clone());
                if needs!(a) {
                    let other = head[b].value.data.clone();
                    let other_shape = sb.clone();
                    backward_broadcast_mul(&sa, &other_shape, &out.shape, dout, &other, pgrad!(a));
                }
                if needs!(b) {
                    let other = head[a].value.data.clone();
                    backward_broadcast_mul(&sb, &sa, &out.shape, dout, &other, pgrad!(b));
                }
            }
            Op::Div(a, b) => {
                let (sa, sb) = (head[a].value.shape.clone(), head[b].value.shape.clone());
                let av = head[a].value.data.clone();
                let bv = head[b].value.data.clone();
                if needs!(a) {
                    // d/da (a/b) = 1/b
                    let ga = pgrad!(a);
                    let a_str = aligned_strides(&sa, &out.shape);
                    let b_str = aligned_strides(&sb, &out.shape);
                    for_each_with(&out.shape, &a_str, &b_str, |o, ao, bo| {
                        ga[ao] += dout[o] / bv[bo];
                    });
                }
                if needs!(b) {
                    // d/db (a/b) = -a/b^2
                    let gb = pgrad!(b);
                    let a_str = aligned_strides(&sa, &out.shape);
                    let b_str = aligned_strides(&sb, &out.shape);
                    for_each_with(&out.shape, &a_str, &b_str, |o, ao, bo| {
                        gb[bo] -= dout[o] * av[ao] / (bv[bo] * bv[bo]);
                    });
                }
            }
            Op::AddScalar(a, _) => {
                if needs!(a) {
                    let g = pgrad!(a);
                    for (gi, d) in g.iter_mut().zip(dout) {
                        *gi += d;
                    }
                }
            }
            Op::MulScalar(a, c) => {
                if needs!(a) {
                    let g = pgrad!(a);
                    for (gi, d) in g.iter_mut().zip(dout) {
                        *gi += c * d;
                    }
                }
            }
            Op::Matmul(a, b) => {
                let av = &head[a].value;
                let bv = &head[b].value;
                let (m, k) = (av.shape[av.rank() - 2], av.shape[av.rank() - 1]);
                let n = bv.shape[bv.rank() - 1];
                let batch: usize = av.shape[..av.rank() - 2].iter().product();
                let (adata, bdata) = (av.data.clone(), bv.data.clone());
                if needs!(a) {
                    let ga = pgrad!(a);
                    for t in 0..batch {
                        let (ao, bo, co) = (t * m * k, t * k * n, t * m * n);
                        // dA = dC . B^T
                        for i2 in 0..m {
                            for k2 in 0..k {
                                let mut s = 0.0;
                                for j2 in 0..n {
                                    s += dout[co + i2 * n + j2] * bdata[bo + k2 * n + j2];
                                }
                                ga[ao + i2 * k + k2] += s;
                            }
                        }
                    }
                }
                if needs!(b) {
                    let gb = pgrad!(b);
                    for t in 0..batch {
                        let (ao, bo, co) = (t * m * k, t * k * n, t * m * n);
                        // dB = A^T . dC
                        for i2 in 0..m {
                            for k2 in 0..k {
                                let aik = adata[ao + i2 * k + k2];
                                if aik == 0.0 {
                                    continue;
                                }
                                for j2 in 0..n {
                                    gb[bo + k2 * n + j2] += aik * dout[co + i2 * n + j2];
                                }
                            }
                        }
                    }
                }
            }
            Op::Transpose(a) => {
                if needs!(a) {
                    let sa = head[a].value.shape.clone();
                    let r = sa.len();
                    let (rows, cols) = (sa[r - 2], sa[r - 1]);
                    let batch: usize = sa[..r - 2].iter().product();
                    let g = pgrad!(a);
                    for t in 0..batch {
                        let base = t * rows * cols;
                        for i2 in 0..rows {
                            for j2 in 0..cols {
                                g[base + i2 * cols + j2] += dout[base + j2 * rows + i2];
                            }
                        }
                    }
                }
            }
            Op::Reshape(a, _) => {
                if needs!(a) {
                    let g = pgrad!(a);
                    for (gi, d) in g.iter_mut().zip(dout) {
                        *gi += d;
                    }
                }
            }
            Op::Concat(parts, axis) => {
                let (outer, _, inner) = lanes(&out.shape, axis);
                let out_extent = out.shape[axis];
                let mut offset = 0usize;
                for &p in &parts {
                    let extent = head[p].value.shape[axis];
                    if head[p].requires_grad {
                        let g = pgrad!(p);
                        for o in 0..outer {
                            for e in 0..extent {
                                let src = (o * out_extent + offset + e) * inner;
                                let dst = (o * extent + e) * inner;
                                for ii in 0..inner {
                                    g[dst + ii] += dout[src + ii];
                                }
                            }
                        }
                    }
                    offset += extent;
                }
            }
            Op::SliceLast(a, start, len) => {
                if needs!(a) {
                    let sa = head[a].value.shape.clone();
                    let full = sa[sa.len() - 1];
                    let rows = head[a].value.len() / full;
                    let g = pgrad!(a);
                    for r2 in 0..rows {
                        for c2 in 0..len {
                            g[r2 * full + start + c2] += dout[r2 * len + c2];
                        }
                    }
                }
            }
            Op::Gather(a, idx) => {
                if needs!(a) {
                    let row: usize = head[a].value.shape[1..].iter().product();
                    let g = pgrad!(a);
                    for (e, &src) in idx.iter().enumerate() {
                        for c2 in 0..row {
                            g[src * row + c2] += dout[e * row + c2];
                        }
                    }
                }
            }
            Op::ScatterAdd(a, idx, _) => {
                if needs!(a) {
                    let row: usize = head[a].value.shape[1..].iter().product();
                    let g = pgrad!(a);
                    for (e, &dst) in idx.iter().enumerate() {
                        for c2 in 0..row {
                            g[e * row + c2] += dout[dst * row + c2];
                        }
                    }
                }
            }
            Op::SumAxis(a, axis) => {
                if needs!(a) {
                    let sa = head[a].value.shape.clone();
                    let (outer, extent, inner) = lanes(&sa, axis);
                    let g = pgrad!(a);
                    for o in 0..outer {
                        for e in 0..extent {
                            for ii in 0..inner {
                                g[(o * extent + e) * inner + ii] += dout[o * inner + ii];
                            }
                        }
                    }
                }
            }
            Op::MeanAxis(a, axis) => {
                if needs!(a) {
                    let sa = head[a].value.shape.clone();
                    let (outer, extent, inner) = lanes(&sa, axis);
                    let scale = 1.0 / extent as f64;
                    let g = pgrad!(a);
                    for o in 0..outer {
                        for e in 0..extent {
                            for ii in 0..inner {
                                g[(o * extent + e) * inner + ii] += dout[o * inner + ii] * scale;
                            }
                        }
                    }
                }
            }
            Op::SumAll(a) => {
                if needs!(a) {
                    let g = pgrad!(a);
                    for gi in g.iter_mut() {
                        *gi += dout[0];
                    }
                }
            }
            Op::MeanAll(a) => {
                if needs!(a) {
                    let scale = 1.0 / head[a].value.len() as f64;
                    let g = pgrad!(a);
                    for gi in g.iter_mut() {
                        *gi += dout[0] * scale;
                    }
                }
            }
            Op::Relu(a) => {
                if needs!(a) {
                    let xv = head[a].value.data.clone();
                    let g = pgrad!(a);
                    for ((gi, d), x) in g.iter_mut().zip(dout).zip(&xv) {
                        if *x > 0.0 {
                            *gi += d;
                        }
                    }
                }
            }
            Op::Sigmoid(a) => {
                if needs!(a) {
                    let y = out.data.clone();
                    let g = pgrad!(a);
                    for ((gi, d), yv) in g.iter_mut().zip(dout).zip(&y) {
                        *gi += d * yv * (1.0 - yv);
                    }
                }
            }
            Op::Tanh(a) => {
                if needs!(a) {
                    let y = out.data.clone();
                    let g = pgrad!(a);
                    for ((gi, d), yv) in g.iter_mut().zip(dout).zip(&y) {
                        *gi += d * (1.0 - yv * yv);
                    }
                }
            }
            Op::Sqrt(a) => {
                if needs!(a) {
                    let y = out.data.clone();
                    let g = pgrad!(a);
                    for ((gi, d), yv) in g.iter_mut().zip(dout).zip(&y) {
                        *gi += d * 0.5 / yv;
                    }
                }
            }
            Op::Square(a) => {
                if needs!(a) {
                    let xv = head[a].value.data.clone();
                    let g = pgrad!(a);
                    for ((gi, d), x) in g.iter_mut().zip(dout).zip(&xv) {
                        *gi += d * 2.0 * x;
                    }
                }
            }
            Op::Exp(a) => {
                if needs!(a) {
                    let y = out.data.clone();
                    let g = pgrad!(a);
                    for ((gi, d), yv) in g.iter_mut().zip(dout).zip(&y) {
                        *gi += d * yv;
                    }
                }
            }
            Op::Log(a) => {
                if needs!(a) {
                    let xv = head[a].value.data.clone();
                    let g = pgrad!(a);
                    for ((gi, d), x) in g.iter_mut().zip(dout).zip(&xv) {
                        *gi += d / x;
                    }
                }
            }
            Op::Softmax(a, axis) => {
                if needs!(a) {
                    let y = out.data.clone();
                    let (outer, extent, inner) = lanes(&out.shape, axis);
                    let g = pgrad!(a);
                    for o in 0..outer {
                        for ii in 0..inner {
                            let at = |e: usize| (o * extent + e) * inner + ii;
                            let mut dot = 0.0;
                            for e in 0..extent {
                                dot += dout[at(e)] * y[at(e)];
                            }
                            for e in 0..extent {
                                g[at(e)] += y[at(e)] * (dout[at(e)] - dot);
                            }
                        }
                    }
                }
            }
            Op::LayerNorm { x, gamma, beta } => {
                let d = head[x].value.shape[head[x].value.rank() - 1];
                let rows = head[x].value.len() / d;
                let xv = head[x].value.data.clone();
                let gv = head[gamma].value.data.clone();
                for r2 in 0..rows {
                    let row = &xv[r2 * d..(r2 + 1) * d];
                    let drow = &dout[r2 * d..(r2 + 1) * d];
                    let mu = row.iter().sum::<f64>() / d as f64;
                    let var = row.iter().map(|v2| (v2 - mu) * (v2 - mu)).sum::<f64>() / d as f64;
                    let s = (var + LAYER_NORM_EPS).sqrt();
                    if head[gamma].requires_grad {
                        let gg = pgrad!(gamma);
                        for j in 0..d {
                            gg[j] += drow[j] * (row[j] - mu) / s;
                        }
                    }
                    if head[beta].requires_grad {
                        let gb = pgrad!(beta);
                        for j in 0..d {
                            gb[j] += drow[j];
                        }
                    }
                    if head[x].requires_grad {
                        // dxhat = dy * gamma; fold mean/variance paths.
                        let mut sum_dxhat = 0.0;
                        let mut sum_dxhat_xhat = 0.0;
                        for j in 0..d {
                            let xhat = (row[j] - mu) / s;
                            let dxhat = drow[j] * gv[j];
                            sum_dxhat += dxhat;
                            sum_dxhat_xhat += dxhat * xhat;
                        }
                        let gx = pgrad!(x);
                        let dn = d as f64;
                        for j in 0..d {
                            let xhat = (row[j] - mu) / s;
                            let dxhat = drow[j] * gv[j];
                            gx[r2 * d + j] +=
                                (dxhat - sum_dxhat / dn - xhat * sum_dxhat_xhat / dn) / s;
                        }
                    }
                }
            }
            Op::NormAxis(a, axis) => {
                if needs!(a) {
                    let xv = head[a].value.data.clone();
                    let sa = head[a].value.shape.clone();
                    let (outer, extent, inner) = lanes(&sa, axis);
                    let y = out.data.clone();
                    let g = pgrad!(a);
                    for o in 0..outer {
                        for ii in 0..inner {
                            let n2 = y[o * inner + ii];
                            if n2 == 0.0 {
                                continue;
                            }
                            let d = dout[o * inner + ii];
                            for e in 0..extent {
                                let at = (o * extent + e) * inner + ii;
                                g[at] += d * xv[at] / n2;
                            }
                        }
                    }
                }
            }
            Op::Cross(a, b) => {
                let av = head[a].value.data.clone();
                let bv = head[b].value.data.clone();
                let vecs = out.len() / 3;
                if needs!(a) {
                    let g = pgrad!(a);
                    for t in 0..vecs {
                        let o = t * 3;
                        let (b1, b2, b3) = (bv[o], bv[o + 1], bv[o + 2]);
                        let (d1, d2, d3) = (dout[o], dout[o + 1], dout[o + 2]);
                        // da = b x dout
                        g[o] += b2 * d3 - b3 * d2;
                        g[o + 1] += b3 * d1 - b1 * d3;
                        g[o + 2] += b1 * d2 - b2 * d1;
                    }
                }
                if needs!(b) {
                    let g = pgrad!(b);
                    for t in 0..vecs {
                        let o = t * 3;
                        let (a1, a2, a3) = (av[o], av[o + 1], av[o + 2]);
                        let (d1, d2, d3) = (dout[o], dout[o + 1], dout[o + 2]);
                        // db = dout x a
                        g[o] += d2 * a3 - d3 * a2;
                        g[o + 1] += d3 * a1 - d1 * a3;
                        g[o + 2] += d1 * a2 - d2 * a1;
                    }
                }
            }
            Op::Atan2(yid, xid) => {
                let yv = head[yid].value.data.clone();
                let xv = head[xid].value.data.clone();
                if needs!(yid) {
                    let g = pgrad!(yid);
                    for i2 in 0..g.len() {
                        let denom = xv[i2] * xv[i2] + yv[i2] * yv[i2];
                        g[i2] += dout[i2] * xv[i2] / denom;
                    }
                }
                if needs!(xid) {
                    let g = pgrad!(xid);
                    for i2 in 0..g.len() {
                        let denom = xv[i2] * xv[i2] + yv[i2] * yv[i2];
                        g[i2] -= dout[i2] * yv[i2] / denom;
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// forward kernels

fn map_unary(a: &TensorData, f: impl Fn(f64) -> f64) -> TensorData {
    TensorData::new(&a.shape, a.data.iter().map(|&x| f(x)).collect())
}

fn eval_broadcast(a: &TensorData, b: &TensorData, f: impl Fn(f64, f64) -> f64) -> TensorData {
    let out_shape = broadcast_shape(&a.shape, &b.shape).expect("validated");
    let mut out = TensorData::zeros(&out_shape);
    for_each_broadcast2(&out_shape, &a.shape, &b.shape, |o, ao, bo| {
        out.data[o] = f(a.data[ao], b.data[bo]);
    });
    out
}

/// Like [`for_each_broadcast2`] but over pre-aligned strides.
fn for_each_with(
    out_shape: &[usize],
    a_str: &[usize],
    b_str: &[usize],
    mut f: impl FnMut(usize, usize, usize),
) {
    let rank = out_shape.len();
    let total: usize = out_shape.iter().product();
    let mut counters = vec![0usize; rank];
    let (mut a_off, mut b_off) = (0usize, 0usize);
    for out_off in 0..total {
        f(out_off, a_off, b_off);
        for ax in (0..rank).rev() {
            counters[ax] += 1;
            a_off += a_str[ax];
            b_off += b_str[ax];
            if counters[ax] < out_shape[ax] {
                break;
            }
            counters[ax] = 0;
            a_off -= a_str[ax] * out_shape[ax];
            b_off -= b_str[ax] * out_shape[ax];
        }
    }
}

/// Accumulate `sign * dout` into `grad`, reducing over broadcast axes.
fn backward_broadcast_into(
    in_shape: &[usize],
    out_shape: &[usize],
    dout: &[f64],
    grad: &mut [f64],
    sign: f64,
) {
    let in_str = aligned_strides(in_shape, out_shape);
    let zero = vec![0usize; out_shape.len()];
    for_each_with(out_shape, &in_str, &zero, |o, io, _| {
        grad[io] += sign * dout[o];
    });
}

/// Gradient of a broadcast product: grad_target += dout * other.
fn backward_broadcast_mul(
    target_shape: &[usize],
    other_shape: &[usize],
    out_shape: &[usize],
    dout: &[f64],
    other: &[f64],
    grad: &mut [f64],
) {
    let t_str = aligned_strides(target_shape, out_shape);
    let o_str = aligned_strides(other_shape, out_shape);
    for_each_with(out_shape, &t_str, &o_str, |o, to, oo| {
        grad[to] += dout[o] * other[oo];
    });
}

fn eval_matmul(a: &TensorData, b: &TensorData) -> TensorData {
    let r = a.rank();
    let (m, k) = (a.shape[r - 2], a.shape[r - 1]);
    let n = b.shape[b.rank() - 1];
    let batch: usize = a.shape[..r - 2].iter().product();
    let mut shape = a.shape[..r - 2].to_vec();
    shape.push(m);
    shape.push(n);
    let mut out = TensorData::zeros(&shape);
    for t in 0..batch {
        let (ao, bo, co) = (t * m * k, t * k * n, t * m * n);
        for i in 0..m {
            for k2 in 0..k {
                let aik = a.data[ao + i * k + k2];
                if aik == 0.0 {
                    continue;
                }
                let brow = &b.data[bo + k2 * n..bo + (k2 + 1) * n];
                let orow = &mut out.data[co + i * n..co + (i + 1) * n];
                for (ov, bv) in orow.iter_mut().zip(brow) {
                    *ov += aik * bv;
                }
            }
        }
    }
    out
}

fn eval_transpose(a: &TensorData) -> TensorData {
    let r = a.rank();
    let (rows, cols) = (a.shape[r - 2], a.shape[r - 1]);
    let batch: usize = a.shape[..r - 2].iter().product();
    let mut shape = a.shape.clone();
    shape.swap(r - 2, r - 1);
    let mut out = TensorData::zeros(&shape);
    for t in 0..batch {
        let base = t * rows * cols;
        for i in 0..rows {
            for j in 0..cols {
                out.data[base + j * rows + i] = a.data[base + i * cols + j];
            }
        }
    }
    out
}

fn eval_concat(parts: &[&TensorData], axis: usize) -> TensorData {
    let mut shape = parts[0].shape.clone();
    shape[axis] = parts.iter().map(|p| p.shape[axis]).sum();
    let (outer, out_extent, inner) = lanes(&shape, axis);
    let mut out = TensorData::zeros(&shape);
    for o in 0..outer {
        let mut offset = 0usize;
        for p in parts {
            let extent = p.shape[axis];
            let src = (o * extent) * inner;
            let dst = (o * out_extent + offset) * inner;
            out.data[dst..dst + extent * inner].copy_from_slice(&p.data[src..src + extent * inner]);
            offset += extent;
        }
    }
    out
}

fn eval_slice_last(a: &TensorData, start: usize, len: usize) -> TensorData {
    let full = a.shape[a.rank() - 1];
    let rows = a.len() / full;
    let mut shape = a.shape.clone();
    *shape.last_mut().unwrap() = len;
    let mut out = TensorData::zeros(&shape);
    for r in 0..rows {
        out.data[r * len..(r + 1) * len]
            .copy_from_slice(&a.data[r * full + start..r * full + start + len]);
    }
    out
}

fn eval_gather(a: &TensorData, idx: &[usize]) -> TensorData {
    let row: usize = a.shape[1..].iter().product();
    let mut shape = a.shape.clone();
    shape[0] = idx.len();
    let mut out = TensorData::zeros(&shape);
    for (e, &src) in idx.iter().enumerate() {
        out.data[e * row..(e + 1) * row].copy_from_slice(&a.data[src * row..(src + 1) * row]);
    }
    out
}

fn eval_scatter_add(a: &TensorData, idx: &[usize], rows: usize) -> TensorData {
    let row: usize = a.shape[1..].iter().product();
    let mut shape = a.shape.clone();
    shape[0] = rows;
    let mut out = TensorData::zeros(&shape);
    for (e, &dst) in idx.iter().enumerate() {
        for c in 0..row {
            out.data[dst * row + c] += a.data[e * row + c];
        }
    }
    out
}

fn eval_reduce(a: &TensorData, axis: usize, mean: bool) -> TensorData {
    let (outer, extent, inner) = lanes(&a.shape, axis);
    let mut shape = a.shape.clone();
    shape[axis] = 1;
    let mut out = TensorData::zeros(&shape);
    let scale = if mean { 1.0 / extent as f64 } else { 1.0 };
    for o in 0..outer {
        for e in 0..extent {
            for i in 0..inner {
                out.data[o * inner + i] += a.data[(o * extent + e) * inner + i];
            }
        }
        if mean {
            for i in 0..inner {
                out.data[o * inner + i] *= scale;
            }
        }
    }
    out
}

fn eval_softmax(a: &TensorData, axis: usize) -> TensorData {
    let (outer, extent, inner) = lanes(&a.shape, axis);
    let mut out = TensorData::zeros(&a.shape);
    for o in 0..outer {
        for i in 0..inner {
            let at = |e: usize| (o * extent + e) * inner + i;
            let mut mx = f64::NEG_INFINITY;
            for e in 0..extent {
                mx = mx.max(a.data[at(e)]);
            }
            let mut z = 0.0;
            for e in 0..extent {
                let v = (a.data[at(e)] - mx).exp();
                out.data[at(e)] = v;
                z += v;
            }
            for e in 0..extent {
                out.data[at(e)] /= z;
            }
        }
    }
    out
}

fn eval_layer_norm(x: &TensorData, gamma: &TensorData, beta: &TensorData) -> TensorData {
    let d = x.shape[x.rank() - 1];
    let rows = x.len() / d;
    let mut out = TensorData::zeros(&x.shape);
    for r in 0..rows {
        let row = &x.data[r * d..(r + 1) * d];
        let mu = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / d as f64;
        let s = (var + LAYER_NORM_EPS).sqrt();
        for j in 0..d {
            out.data[r * d + j] = gamma.data[j] * (row[j] - mu) / s + beta.data[j];
        }
    }
    out
}

fn eval_norm(a: &TensorData, axis: usize) -> TensorData {
    let (outer, extent, inner) = lanes(&a.shape, axis);
    let mut shape = a.shape.clone();
    shape[axis] = 1;
    let mut out = TensorData::zeros(&shape);
    for o in 0..outer {
        for i in 0..inner {
            let mut s = 0.0;
            for e in 0..extent {
                let v = a.data[(o * extent + e) * inner + i];
                s += v * v;
            }
            out.data[o * inner + i] = s.sqrt();
        }
    }
    out
}

fn eval_cross(a: &TensorData, b: &TensorData) -> TensorData {
    let mut out = TensorData::zeros(&a.shape);
    for t in 0..a.len() / 3 {
        let o = t * 3;
        let (a1, a2, a3) = (a.data[o], a.data[o + 1], a.data[o + 2]);
        let (b1, b2, b3) = (b.data[o], b.data[o + 1], b.data[o + 2]);
        out.data[o] = a2 * b3 - a3 * b2;
        out.data[o + 1] = a3 * b1 - a1 * b3;
        out.data[o + 2] = a1 * b2 - a2 * b1;
    }
    out
}
