use std::cell::{Cell, Ref, RefCell};
use std::sync::Arc;

use super::op::OpKind;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a node on a [`Tape`]. Only meaningful for the tape that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

pub type Op<T> = OpKind<T, Var>;

#[derive(Debug)]
pub(crate) struct Node<T> {
    pub(crate) op: Op<T>,
    pub(crate) value: Arc<Tensor<T>>,
    pub(crate) requires_grad: bool,
}

/// Append-only record of a computation.
///
/// Nodes are pushed in evaluation order, so parents always precede their
/// children. Gradients computed with [`Tape::grad_graph`] are recorded on the
/// same tape and can be differentiated again.
#[derive(Debug)]
pub struct Tape<T> {
    pub(crate) nodes: RefCell<Vec<Node<T>>>,
    generation: Cell<usize>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
            generation: Cell::new(0),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of graph-recording backward passes run on this tape.
    pub fn generation(&self) -> usize {
        self.generation.get()
    }

    pub(crate) fn bump_generation(&self) {
        self.generation.set(self.generation.get() + 1);
    }

    pub(crate) fn nodes(&self) -> Ref<'_, Vec<Node<T>>> {
        self.nodes.borrow()
    }

    pub fn leaf(&self, value: Tensor<T>, requires_grad: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            op: OpKind::Leaf,
            value: Arc::new(value),
            requires_grad,
        });
        Var(nodes.len() - 1)
    }

    /// Differentiable leaf.
    pub fn param(&self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn scalar(&self, x: T) -> Var {
        self.constant(Tensor::scalar(x))
    }

    pub fn value(&self, v: Var) -> Arc<Tensor<T>> {
        Arc::clone(&self.nodes.borrow()[v.0].value)
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    /// First element of the node's value.
    pub fn item(&self, v: Var) -> T {
        self.nodes.borrow()[v.0].value.item()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes.borrow()[v.0].requires_grad
    }

    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes.borrow()[v.0].op.name()
    }

    /// Parent handles of a node.
    pub fn parents(&self, v: Var) -> Vec<Var> {
        self.nodes.borrow()[v.0].op.operands().into_iter().copied().collect()
    }

    /// Evaluates the forward rule of `op` on its (already recorded) operands
    /// and appends the result.
    pub fn record(&self, op: Op<T>) -> Result<Var> {
        let (value, requires_grad) = {
            let nodes = self.nodes.borrow();
            for p in op.operands() {
                if p.0 >= nodes.len() {
                    return Err(Error::UnknownNode(p.0));
                }
            }
            let value = op.eval(|v| &*nodes[v.0].value)?;
            let requires_grad = !matches!(op, OpKind::StopGradient(_))
                && op.operands().iter().any(|p| nodes[p.0].requires_grad);
            (value, requires_grad)
        };
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            op,
            value: Arc::new(value),
            requires_grad,
        });
        Ok(Var(nodes.len() - 1))
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        self.record(OpKind::Add(a, b))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        self.record(OpKind::Sub(a, b))
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        self.record(OpKind::Mul(a, b))
    }

    pub fn div(&self, a: Var, b: Var) -> Result<Var> {
        self.record(OpKind::Div(a, b))
    }

    pub fn maximum(&self, a: Var, b: Var) -> Result<Var> {
        self.record(OpKind::Maximum(a, b))
    }

    pub fn neg(&self, a: Var) -> Result<Var> {
        self.record(OpKind::Neg(a))
    }

    pub fn exp(&self, a: Var) -> Result<Var> {
        self.record(OpKind::Exp(a))
    }

    pub fn log(&self, a: Var) -> Result<Var> {
        self.record(OpKind::Log(a))
    }

    pub fn square(&self, a: Var) -> Result<Var> {
        self.record(OpKind::Square(a))
    }

    pub fn sqrt(&self, a: Var) -> Result<Var> {
        self.record(OpKind::Sqrt(a))
    }

    pub fn tanh(&self, a: Var) -> Result<Var> {
        self.record(OpKind::Tanh(a))
    }

    pub fn sigmoid(&self, a: Var) -> Result<Var> {
        self.record(OpKind::Sigmoid(a))
    }

    pub fn scale(&self, a: Var, c: T) -> Result<Var> {
        self.record(OpKind::Scale(a, c))
    }

    pub fn shift(&self, a: Var, c: T) -> Result<Var> {
        self.record(OpKind::Shift(a, c))
    }

    pub fn sum(&self, a: Var) -> Result<Var> {
        self.record(OpKind::Sum(a))
    }

    pub fn mean(&self, a: Var) -> Result<Var> {
        let n = self.nodes.borrow()[a.0].value.numel();
        let s = self.sum(a)?;
        self.scale(s, T::one() / T::lit(n as f64))
    }

    pub fn sum_axis(&self, a: Var, axis: usize) -> Result<Var> {
        self.record(OpKind::SumAxis(a, axis))
    }

    pub fn mean_axis(&self, a: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(a);
        let n = *shape.get(axis).ok_or(Error::InvalidAxis {
            axis,
            shape: shape.clone(),
        })?;
        let s = self.sum_axis(a, axis)?;
        self.scale(s, T::one() / T::lit(n as f64))
    }

    pub fn broadcast(&self, a: Var, shape: &[usize]) -> Result<Var> {
        self.record(OpKind::Broadcast(a, shape.to_vec()))
    }

    pub fn expand_axis(&self, a: Var, axis: usize, n: usize) -> Result<Var> {
        self.record(OpKind::ExpandAxis(a, axis, n))
    }

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        self.record(OpKind::MatMul(a, b))
    }

    pub fn transpose(&self, a: Var) -> Result<Var> {
        self.record(OpKind::Transpose(a))
    }

    pub fn concat(&self, parts: &[Var], axis: usize) -> Result<Var> {
        self.record(OpKind::Concat(parts.to_vec(), axis))
    }

    pub fn slice(&self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        self.record(OpKind::Slice {
            x,
            axis,
            start,
            len,
        })
    }

    pub fn pad(&self, x: Var, axis: usize, before: usize, after: usize) -> Result<Var> {
        self.record(OpKind::Pad {
            x,
            axis,
            before,
            after,
        })
    }

    /// Gathers `x[t, idx[t]]` for every row `t`.
    pub fn index_select(&self, x: Var, idx: &[usize]) -> Result<Var> {
        self.record(OpKind::IndexSelect(x, idx.into()))
    }

    pub fn scatter_rows(&self, x: Var, idx: &[usize], width: usize) -> Result<Var> {
        self.record(OpKind::ScatterRows(x, idx.into(), width))
    }

    pub fn reshape(&self, a: Var, shape: &[usize]) -> Result<Var> {
        self.record(OpKind::Reshape(a, shape.to_vec()))
    }

    pub fn reverse(&self, a: Var, axis: usize) -> Result<Var> {
        self.record(OpKind::Reverse(a, axis))
    }

    pub fn softmax(&self, a: Var, axis: usize) -> Result<Var> {
        self.record(OpKind::Softmax(a, axis))
    }

    pub fn log_softmax(&self, a: Var, axis: usize) -> Result<Var> {
        self.record(OpKind::LogSoftmax(a, axis))
    }

    /// Identity on values; blocks gradient flow in every differentiation order.
    pub fn stop_gradient(&self, a: Var) -> Result<Var> {
        self.record(OpKind::StopGradient(a))
    }
}
