use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use ndarray::{s, Array2, Axis};

use super::Tensor;
use crate::error::{Error, Result};

pub type NodeId = usize;

/// Operation record kept on the tape. Inputs always have smaller ids than
/// the node that consumes them.
#[derive(Clone, Copy, Debug)]
#[allow(dead_code)]
pub(crate) enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// `n×c` plus a `1×c` row broadcast over rows.
    AddBias(NodeId, NodeId),
    /// `n×c → 1×c`.
    SumRows(NodeId),
    /// `1×c → n×c`.
    BroadcastRows(NodeId, usize),
    /// `n×c → n×1`.
    SumCols(NodeId),
    /// `n×1 → n×c`.
    BroadcastCols(NodeId, usize),
    /// `r×c → 1×1`.
    Sum(NodeId),
    /// `1×1 → r×c`.
    BroadcastScalar(NodeId, usize, usize),
    Scale(NodeId, f64),
    AddScalar(NodeId, f64),
    /// Column-wise concatenation.
    Concat(NodeId, NodeId),
    SliceCols(NodeId, usize, usize),
    /// Places the input at column offset `left` inside `total` zero columns.
    PadCols(NodeId, usize, usize),
    Relu(NodeId),
    LeakyRelu(NodeId, f64),
    Silu(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Exp(NodeId),
    Square(NodeId),
    /// Row-wise ℓ₂ norm, `n×c → n×1`.
    NormRows(NodeId),
    /// `1/x`, with `1/0` defined as `0`.
    SafeRecip(NodeId),
}

impl Op {
    pub(crate) fn inputs(&self) -> [Option<NodeId>; 2] {
        use Op::*;
        match *self {
            Leaf => [None, None],
            MatMul(a, b) | Add(a, b) | Sub(a, b) | Mul(a, b) | AddBias(a, b) | Concat(a, b) => {
                [Some(a), Some(b)]
            }
            Transpose(a)
            | SumRows(a)
            | BroadcastRows(a, _)
            | SumCols(a)
            | BroadcastCols(a, _)
            | Sum(a)
            | BroadcastScalar(a, _, _)
            | Scale(a, _)
            | AddScalar(a, _)
            | SliceCols(a, _, _)
            | PadCols(a, _, _)
            | Relu(a)
            | LeakyRelu(a, _)
            | Silu(a)
            | Sigmoid(a)
            | Tanh(a)
            | Exp(a)
            | Square(a)
            | NormRows(a)
            | SafeRecip(a) => [Some(a), None],
        }
    }
}

pub(crate) struct Node {
    pub(crate) op: Op,
    pub(crate) value: Arc<Array2<f64>>,
}

/// Append-only tape of operations.
///
/// A graph lives for one evaluation (typically one optimizer step) and is
/// dropped afterwards. It is confined to a single thread.
#[derive(Default)]
pub struct Graph {
    pub(crate) nodes: RefCell<Vec<Node>>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph").field("nodes", &self.len()).finish()
    }
}

/// A tensor attached to a [`Graph`].
#[derive(Clone, Copy)]
pub struct Var<'g> {
    pub(crate) graph: &'g Graph,
    pub(crate) id: NodeId,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn push(&self, op: Op, value: Array2<f64>) -> Var<'_> {
        self.push_shared(op, Arc::new(value))
    }

    pub(crate) fn push_shared(&self, op: Op, value: Arc<Array2<f64>>) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { op, value });
        Var {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    pub(crate) fn op(&self, id: NodeId) -> Op {
        self.nodes.borrow()[id].op
    }

    pub(crate) fn value(&self, id: NodeId) -> Arc<Array2<f64>> {
        Arc::clone(&self.nodes.borrow()[id].value)
    }

    /// Lifts a tensor onto the tape as a leaf. Parameters and constants are
    /// both leaves; only the `wrt` list passed to [`Graph::grad`] decides
    /// what gets differentiated.
    pub fn leaf(&self, tensor: &Tensor) -> Var<'_> {
        self.push_shared(Op::Leaf, tensor.shared())
    }

    pub fn constant(&self, array: Array2<f64>) -> Var<'_> {
        self.push(Op::Leaf, array)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(Array2::from_elem((1, 1), value))
    }
}

fn same_graph(a: &Var<'_>, b: &Var<'_>) -> Result<()> {
    if std::ptr::eq(a.graph, b.graph) {
        Ok(())
    } else {
        Err(Error::ForeignGraph)
    }
}

fn mismatch(op: &'static str, a: &[usize], b: &[usize]) -> Error {
    Error::ShapeMismatch {
        op,
        lhs: a.to_vec(),
        rhs: b.to_vec(),
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'g> Var<'g> {
    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn value(&self) -> Arc<Array2<f64>> {
        self.graph.value(self.id)
    }

    /// Detached copy of the current value.
    pub fn tensor(&self) -> Tensor {
        Tensor::from_shared(self.value())
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.value().dim()
    }

    /// The single value of a `1×1` var.
    pub fn item(&self) -> Result<f64> {
        self.tensor().item()
    }

    fn unary(&self, op: Op, f: impl FnOnce(&Array2<f64>) -> Array2<f64>) -> Var<'g> {
        let out = f(&self.value());
        self.graph.push(op, out)
    }

    fn map(&self, op: Op, f: impl Fn(f64) -> f64) -> Var<'g> {
        self.unary(op, |a| a.mapv(f))
    }

    pub fn matmul(&self, rhs: &Var<'g>) -> Result<Var<'g>> {
        same_graph(self, rhs)?;
        let (a, b) = (self.value(), rhs.value());
        if a.ncols() != b.nrows() {
            return Err(mismatch("matmul", a.shape(), b.shape()));
        }
        Ok(self.graph.push(Op::MatMul(self.id, rhs.id), a.dot(&*b)))
    }

    pub fn transpose(&self) -> Var<'g> {
        self.unary(Op::Transpose(self.id), |a| {
            a.t().as_standard_layout().into_owned()
        })
    }

    fn zip(
        &self,
        rhs: &Var<'g>,
        name: &'static str,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var<'g>> {
        same_graph(self, rhs)?;
        let (a, b) = (self.value(), rhs.value());
        if a.dim() != b.dim() {
            return Err(mismatch(name, a.shape(), b.shape()));
        }
        let mut out = (*a).clone();
        out.zip_mut_with(&*b, |x, &y| *x = f(*x, y));
        Ok(self.graph.push(op, out))
    }

    pub fn add(&self, rhs: &Var<'g>) -> Result<Var<'g>> {
        self.zip(rhs, "add", Op::Add(self.id, rhs.id), |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Var<'g>) -> Result<Var<'g>> {
        self.zip(rhs, "sub", Op::Sub(self.id, rhs.id), |a, b| a - b)
    }

    /// Elementwise product.
    pub fn mul(&self, rhs: &Var<'g>) -> Result<Var<'g>> {
        self.zip(rhs, "mul", Op::Mul(self.id, rhs.id), |a, b| a * b)
    }

    /// Adds a `1×c` bias row to every row of an `n×c` batch.
    pub fn add_bias(&self, bias: &Var<'g>) -> Result<Var<'g>> {
        same_graph(self, bias)?;
        let (a, b) = (self.value(), bias.value());
        if b.nrows() != 1 || a.ncols() != b.ncols() {
            return Err(mismatch("add_bias", a.shape(), b.shape()));
        }
        let out = &*a + &b.row(0);
        Ok(self.graph.push(Op::AddBias(self.id, bias.id), out))
    }

    pub fn sum_rows(&self) -> Var<'g> {
        self.unary(Op::SumRows(self.id), |a| a.sum_axis(Axis(0)).insert_axis(Axis(0)))
    }

    pub fn broadcast_rows(&self, rows: usize) -> Result<Var<'g>> {
        let a = self.value();
        if a.nrows() != 1 {
            return Err(mismatch("broadcast_rows", a.shape(), &[rows, a.ncols()]));
        }
        let out = a.broadcast((rows, a.ncols())).unwrap().to_owned();
        Ok(self.graph.push(Op::BroadcastRows(self.id, rows), out))
    }

    pub fn sum_cols(&self) -> Var<'g> {
        self.unary(Op::SumCols(self.id), |a| a.sum_axis(Axis(1)).insert_axis(Axis(1)))
    }

    pub fn broadcast_cols(&self, cols: usize) -> Result<Var<'g>> {
        let a = self.value();
        if a.ncols() != 1 {
            return Err(mismatch("broadcast_cols", a.shape(), &[a.nrows(), cols]));
        }
        let out = a.broadcast((a.nrows(), cols)).unwrap().to_owned();
        Ok(self.graph.push(Op::BroadcastCols(self.id, cols), out))
    }

    /// Sum of all entries, as a `1×1` var.
    pub fn sum(&self) -> Var<'g> {
        self.unary(Op::Sum(self.id), |a| Array2::from_elem((1, 1), a.sum()))
    }

    pub fn broadcast_scalar(&self, rows: usize, cols: usize) -> Result<Var<'g>> {
        let a = self.value();
        if a.dim() != (1, 1) {
            return Err(mismatch("broadcast_scalar", a.shape(), &[rows, cols]));
        }
        let out = Array2::from_elem((rows, cols), a[[0, 0]]);
        Ok(self.graph.push(Op::BroadcastScalar(self.id, rows, cols), out))
    }

    /// Mean of all entries, as a `1×1` var.
    pub fn mean(&self) -> Var<'g> {
        let n = self.value().len().max(1) as f64;
        self.sum().scale(1.0 / n)
    }

    pub fn scale(&self, c: f64) -> Var<'g> {
        self.map(Op::Scale(self.id, c), |x| x * c)
    }

    pub fn neg(&self) -> Var<'g> {
        self.scale(-1.0)
    }

    pub fn add_scalar(&self, c: f64) -> Var<'g> {
        self.map(Op::AddScalar(self.id, c), |x| x + c)
    }

    /// Concatenates along the last axis.
    pub fn concat(&self, rhs: &Var<'g>) -> Result<Var<'g>> {
        same_graph(self, rhs)?;
        let (a, b) = (self.value(), rhs.value());
        if a.nrows() != b.nrows() {
            return Err(mismatch("concat", a.shape(), b.shape()));
        }
        let out = ndarray::concatenate(Axis(1), &[a.view(), b.view()]).unwrap();
        Ok(self.graph.push(Op::Concat(self.id, rhs.id), out))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&self, start: usize, end: usize) -> Result<Var<'g>> {
        let a = self.value();
        if start > end || end > a.ncols() {
            return Err(mismatch("slice_cols", a.shape(), &[start, end]));
        }
        let out = a.slice(s![.., start..end]).to_owned();
        Ok(self.graph.push(Op::SliceCols(self.id, start, end), out))
    }

    pub fn pad_cols(&self, left: usize, total: usize) -> Result<Var<'g>> {
        let a = self.value();
        if left + a.ncols() > total {
            return Err(mismatch("pad_cols", a.shape(), &[left, total]));
        }
        let mut out = Array2::zeros((a.nrows(), total));
        out.slice_mut(s![.., left..left + a.ncols()]).assign(&*a);
        Ok(self.graph.push(Op::PadCols(self.id, left, total), out))
    }

    pub fn relu(&self) -> Var<'g> {
        self.map(Op::Relu(self.id), |x| x.max(0.0))
    }

    /// `max(x, 0) + alpha * min(x, 0)`.
    pub fn leaky_relu(&self, alpha: f64) -> Var<'g> {
        self.map(Op::LeakyRelu(self.id, alpha), move |x| {
            if x > 0.0 {
                x
            } else {
                alpha * x
            }
        })
    }

    pub fn silu(&self) -> Var<'g> {
        self.map(Op::Silu(self.id), |x| x * sigmoid(x))
    }

    pub fn sigmoid(&self) -> Var<'g> {
        self.map(Op::Sigmoid(self.id), sigmoid)
    }

    pub fn tanh(&self) -> Var<'g> {
        self.map(Op::Tanh(self.id), f64::tanh)
    }

    pub fn exp(&self) -> Var<'g> {
        self.map(Op::Exp(self.id), f64::exp)
    }

    pub fn square(&self) -> Var<'g> {
        self.map(Op::Square(self.id), |x| x * x)
    }

    /// ℓ₂ norm of each row, as an `n×1` column.
    pub fn norm_rows(&self) -> Var<'g> {
        self.unary(Op::NormRows(self.id), |a| {
            a.map_axis(Axis(1), |row| row.dot(&row).sqrt())
                .insert_axis(Axis(1))
        })
    }

    pub(crate) fn safe_recip(&self) -> Var<'g> {
        self.map(Op::SafeRecip(self.id), |x| if x == 0.0 { 0.0 } else { 1.0 / x })
    }
}
