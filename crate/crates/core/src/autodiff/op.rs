use std::sync::Arc;

use super::kernels;
use super::tensor::Tensor;
use crate::error::Result;
use crate::scalar::Scalar;

/// Operation tag with its operands.
///
/// `X` is the operand type: tape handles when recording, tensors when the
/// backward pass evaluates adjoints eagerly. Sharing one enum keeps the
/// forward rule and both backward modes in lockstep.
#[derive(Debug, Clone)]
pub enum OpKind<T, X> {
    Leaf,
    Add(X, X),
    Sub(X, X),
    Mul(X, X),
    Div(X, X),
    Maximum(X, X),
    Neg(X),
    Exp(X),
    Log(X),
    Square(X),
    Sqrt(X),
    Tanh(X),
    Sigmoid(X),
    /// Multiply by a constant.
    Scale(X, T),
    /// Add a constant.
    Shift(X, T),
    /// Sum of all entries, rank-0 result.
    Sum(X),
    SumAxis(X, usize),
    /// Fill a shape with a single-element operand.
    Broadcast(X, Vec<usize>),
    /// Insert a new axis of the given size, repeating the operand along it.
    ExpandAxis(X, usize, usize),
    MatMul(X, X),
    Transpose(X),
    Concat(Vec<X>, usize),
    Slice {
        x: X,
        axis: usize,
        start: usize,
        len: usize,
    },
    /// Zero padding along one axis; adjoint of `Slice`.
    Pad {
        x: X,
        axis: usize,
        before: usize,
        after: usize,
    },
    /// One entry per row of a matrix: `out[t] = x[t, idx[t]]`.
    IndexSelect(X, Arc<[usize]>),
    /// Adjoint of `IndexSelect`: a `[T, width]` matrix of zeros with `x[t]` at `idx[t]`.
    ScatterRows(X, Arc<[usize]>, usize),
    Reshape(X, Vec<usize>),
    Reverse(X, usize),
    Softmax(X, usize),
    LogSoftmax(X, usize),
    StopGradient(X),
}

impl<T: Scalar, X> OpKind<T, X> {
    pub fn name(&self) -> &'static str {
        use OpKind::*;
        match self {
            Leaf => "leaf",
            Add(..) => "add",
            Sub(..) => "sub",
            Mul(..) => "mul",
            Div(..) => "div",
            Maximum(..) => "maximum",
            Neg(_) => "neg",
            Exp(_) => "exp",
            Log(_) => "log",
            Square(_) => "square",
            Sqrt(_) => "sqrt",
            Tanh(_) => "tanh",
            Sigmoid(_) => "sigmoid",
            Scale(..) => "scale",
            Shift(..) => "shift",
            Sum(_) => "sum",
            SumAxis(..) => "sum_axis",
            Broadcast(..) => "broadcast",
            ExpandAxis(..) => "expand_axis",
            MatMul(..) => "matmul",
            Transpose(_) => "transpose",
            Concat(..) => "concat",
            Slice { .. } => "slice",
            Pad { .. } => "pad",
            IndexSelect(..) => "index_select",
            ScatterRows(..) => "scatter_rows",
            Reshape(..) => "reshape",
            Reverse(..) => "reverse",
            Softmax(..) => "softmax",
            LogSoftmax(..) => "log_softmax",
            StopGradient(_) => "stop_gradient",
        }
    }

    /// Operands in declaration order.
    pub fn operands(&self) -> Vec<&X> {
        use OpKind::*;
        match self {
            Leaf => Vec::new(),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Maximum(a, b) | MatMul(a, b) => {
                vec![a, b]
            }
            Neg(a) | Exp(a) | Log(a) | Square(a) | Sqrt(a) | Tanh(a) | Sigmoid(a)
            | Scale(a, _) | Shift(a, _) | Sum(a) | SumAxis(a, _) | Broadcast(a, _)
            | ExpandAxis(a, _, _) | Transpose(a) | IndexSelect(a, _) | ScatterRows(a, _, _)
            | Reshape(a, _) | Reverse(a, _) | Softmax(a, _) | LogSoftmax(a, _)
            | StopGradient(a) => vec![a],
            Slice { x, .. } | Pad { x, .. } => vec![x],
            Concat(parts, _) => parts.iter().collect(),
        }
    }

    /// Forward rule. `get` resolves an operand to its value.
    pub fn eval<'a>(&'a self, get: impl Fn(&'a X) -> &'a Tensor<T>) -> Result<Tensor<T>> {
        use OpKind::*;
        match self {
            Leaf => Err(crate::error::Error::invalid("leaf nodes carry their own value")),
            Add(a, b) => kernels::binary("add", get(a), get(b), |x, y| x + y),
            Sub(a, b) => kernels::binary("sub", get(a), get(b), |x, y| x - y),
            Mul(a, b) => kernels::binary("mul", get(a), get(b), |x, y| x * y),
            Div(a, b) => kernels::binary("div", get(a), get(b), |x, y| x / y),
            Maximum(a, b) => kernels::binary("maximum", get(a), get(b), |x, y| x.max(y)),
            Neg(a) => Ok(get(a).map(|x| -x)),
            Exp(a) => Ok(get(a).map(|x| x.exp())),
            Log(a) => Ok(get(a).map(|x| x.ln())),
            Square(a) => Ok(get(a).map(|x| x * x)),
            Sqrt(a) => Ok(get(a).map(|x| x.sqrt())),
            Tanh(a) => Ok(get(a).map(|x| x.tanh())),
            Sigmoid(a) => Ok(get(a).map(kernels::sigmoid)),
            Scale(a, c) => {
                let c = *c;
                Ok(get(a).map(|x| x * c))
            }
            Shift(a, c) => {
                let c = *c;
                Ok(get(a).map(|x| x + c))
            }
            Sum(a) => Ok(Tensor::scalar(get(a).data().iter().copied().sum())),
            SumAxis(a, axis) => kernels::sum_axis(get(a), *axis),
            Broadcast(a, shape) => kernels::broadcast(get(a), shape),
            ExpandAxis(a, axis, n) => kernels::expand_axis(get(a), *axis, *n),
            MatMul(a, b) => kernels::matmul(get(a), get(b)),
            Transpose(a) => kernels::transpose(get(a)),
            Concat(parts, axis) => {
                let values: Vec<&Tensor<T>> = parts.iter().map(get).collect();
                kernels::concat(&values, *axis)
            }
            Slice { x, axis, start, len } => kernels::slice(get(x), *axis, *start, *len),
            Pad {
                x,
                axis,
                before,
                after,
            } => kernels::pad(get(x), *axis, *before, *after),
            IndexSelect(a, idx) => kernels::index_select(get(a), idx),
            ScatterRows(a, idx, width) => kernels::scatter_rows(get(a), idx, *width),
            Reshape(a, shape) => get(a).reshaped(shape),
            Reverse(a, axis) => kernels::reverse(get(a), *axis),
            Softmax(a, axis) => kernels::softmax(get(a), *axis),
            LogSoftmax(a, axis) => kernels::log_softmax(get(a), *axis),
            StopGradient(a) => Ok(get(a).clone()),
        }
    }
}
