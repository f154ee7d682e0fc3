//! Reverse-mode differentiation over a [`Tape`].
//!
//! Every adjoint rule is written once against the [`Adjoint`] algebra. The
//! eager algebra evaluates it on tensors; the recording algebra appends it to
//! the tape, so the returned gradients are themselves differentiable nodes.

use std::collections::HashMap;
use std::sync::Arc;

use super::op::OpKind;
use super::tape::{Op, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Result of [`Tape::backward`].
#[derive(Debug, Clone)]
pub enum Gradient<T> {
    /// A node on the tape (graph-recording mode).
    Node(Var),
    Value(Tensor<T>),
}

impl<T: Scalar> Gradient<T> {
    pub fn as_var(&self) -> Option<Var> {
        match self {
            Gradient::Node(v) => Some(*v),
            Gradient::Value(_) => None,
        }
    }

    pub fn into_tensor(self, tape: &Tape<T>) -> Tensor<T> {
        match self {
            Gradient::Node(v) => (*tape.value(v)).clone(),
            Gradient::Value(t) => t,
        }
    }
}

pub(crate) trait Adjoint<T: Scalar> {
    type V: Clone;
    fn node(&self, v: Var) -> Self::V;
    fn constant(&self, t: Tensor<T>) -> Self::V;
    fn shape(&self, v: &Self::V) -> Vec<usize>;
    fn apply(&self, op: OpKind<T, Self::V>) -> Result<Self::V>;
}

struct Eager<'a, T> {
    tape: &'a Tape<T>,
}

impl<T: Scalar> Adjoint<T> for Eager<'_, T> {
    type V = Arc<Tensor<T>>;

    fn node(&self, v: Var) -> Self::V {
        self.tape.value(v)
    }

    fn constant(&self, t: Tensor<T>) -> Self::V {
        Arc::new(t)
    }

    fn shape(&self, v: &Self::V) -> Vec<usize> {
        v.shape().to_vec()
    }

    fn apply(&self, op: OpKind<T, Self::V>) -> Result<Self::V> {
        op.eval(|x| &**x).map(Arc::new)
    }
}

struct Recording<'a, T> {
    tape: &'a Tape<T>,
}

impl<T: Scalar> Adjoint<T> for Recording<'_, T> {
    type V = Var;

    fn node(&self, v: Var) -> Var {
        v
    }

    fn constant(&self, t: Tensor<T>) -> Var {
        self.tape.constant(t)
    }

    fn shape(&self, v: &Var) -> Vec<usize> {
        self.tape.shape(*v)
    }

    fn apply(&self, op: Op<T>) -> Result<Var> {
        self.tape.record(op)
    }
}

/// Sums a gradient back down to a rank-0 operand that was broadcast.
fn unbroadcast<T: Scalar, A: Adjoint<T>>(alg: &A, g: A::V, target: &[usize]) -> Result<A::V> {
    if alg.shape(&g) == target {
        Ok(g)
    } else {
        alg.apply(OpKind::Sum(g))
    }
}

/// Parent contributions of one node given its output adjoint `g`.
fn vjp<T: Scalar, A: Adjoint<T>>(
    alg: &A,
    tape: &Tape<T>,
    op: &Op<T>,
    out: Var,
    g: A::V,
    need: &dyn Fn(Var) -> bool,
) -> Result<Vec<(Var, A::V)>> {
    use OpKind::*;
    let ap = |o: OpKind<T, A::V>| alg.apply(o);
    let n = |v: Var| alg.node(v);
    let mut out_grads = Vec::with_capacity(2);
    match op {
        Leaf | StopGradient(_) => {}
        Add(a, b) | Sub(a, b) => {
            if need(*a) {
                out_grads.push((*a, unbroadcast(alg, g.clone(), &tape.shape(*a))?));
            }
            if need(*b) {
                let gb = if matches!(op, Sub(..)) {
                    ap(Neg(g.clone()))?
                } else {
                    g.clone()
                };
                out_grads.push((*b, unbroadcast(alg, gb, &tape.shape(*b))?));
            }
        }
        Mul(a, b) => {
            if need(*a) {
                let ga = ap(Mul(g.clone(), n(*b)))?;
                out_grads.push((*a, unbroadcast(alg, ga, &tape.shape(*a))?));
            }
            if need(*b) {
                let gb = ap(Mul(g.clone(), n(*a)))?;
                out_grads.push((*b, unbroadcast(alg, gb, &tape.shape(*b))?));
            }
        }
        Div(a, b) => {
            if need(*a) {
                let ga = ap(Div(g.clone(), n(*b)))?;
                out_grads.push((*a, unbroadcast(alg, ga, &tape.shape(*a))?));
            }
            if need(*b) {
                // d(a/b)/db = -(a/b)/b
                let gb = ap(Neg(ap(Div(ap(Mul(g.clone(), n(out)))?, n(*b)))?))?;
                out_grads.push((*b, unbroadcast(alg, gb, &tape.shape(*b))?));
            }
        }
        Maximum(a, b) => {
            let (va, vb) = (tape.value(*a), tape.value(*b));
            let mask = super::kernels::binary("maximum", &va, &vb, |x, y| {
                if x >= y {
                    T::one()
                } else {
                    T::zero()
                }
            })?;
            let inv = mask.map(|m| T::one() - m);
            if need(*a) {
                let ga = ap(Mul(g.clone(), alg.constant(mask)))?;
                out_grads.push((*a, unbroadcast(alg, ga, va.shape())?));
            }
            if need(*b) {
                let gb = ap(Mul(g.clone(), alg.constant(inv)))?;
                out_grads.push((*b, unbroadcast(alg, gb, vb.shape())?));
            }
        }
        Neg(a) => out_grads.push((*a, ap(Neg(g))?)),
        Exp(a) => out_grads.push((*a, ap(Mul(g, n(out)))?)),
        Log(a) => out_grads.push((*a, ap(Div(g, n(*a)))?)),
        Square(a) => out_grads.push((*a, ap(Mul(ap(Scale(g, T::lit(2.0)))?, n(*a)))?)),
        Sqrt(a) => out_grads.push((*a, ap(Div(ap(Scale(g, T::lit(0.5)))?, n(out)))?)),
        Tanh(a) => {
            // g * (1 - y^2)
            let one_minus = ap(Shift(ap(Neg(ap(Square(n(out)))?))?, T::one()))?;
            out_grads.push((*a, ap(Mul(g, one_minus))?));
        }
        Sigmoid(a) => {
            // g * y * (1 - y)
            let y = n(out);
            let one_minus = ap(Shift(ap(Neg(y.clone()))?, T::one()))?;
            out_grads.push((*a, ap(Mul(ap(Mul(g, y))?, one_minus))?));
        }
        Scale(a, c) => out_grads.push((*a, ap(Scale(g, *c))?)),
        Shift(a, _) => out_grads.push((*a, g)),
        Sum(a) => out_grads.push((*a, ap(Broadcast(g, tape.shape(*a)))?)),
        SumAxis(a, axis) => {
            let size = tape.shape(*a)[*axis];
            out_grads.push((*a, ap(ExpandAxis(g, *axis, size))?));
        }
        Broadcast(a, _) => {
            let s = ap(Sum(g))?;
            out_grads.push((*a, ap(Reshape(s, tape.shape(*a)))?));
        }
        ExpandAxis(a, axis, _) => out_grads.push((*a, ap(SumAxis(g, *axis))?)),
        MatMul(a, b) => {
            if need(*a) {
                let bt = ap(Transpose(n(*b)))?;
                out_grads.push((*a, ap(MatMul(g.clone(), bt))?));
            }
            if need(*b) {
                let at = ap(Transpose(n(*a)))?;
                out_grads.push((*b, ap(MatMul(at, g.clone()))?));
            }
        }
        Transpose(a) => out_grads.push((*a, ap(Transpose(g))?)),
        Concat(parts, axis) => {
            let mut offset = 0;
            for p in parts {
                let len = tape.shape(*p)[*axis];
                if need(*p) {
                    let gp = ap(Slice {
                        x: g.clone(),
                        axis: *axis,
                        start: offset,
                        len,
                    })?;
                    out_grads.push((*p, gp));
                }
                offset += len;
            }
        }
        Slice { x, axis, start, len } => {
            let total = tape.shape(*x)[*axis];
            out_grads.push((
                *x,
                ap(Pad {
                    x: g,
                    axis: *axis,
                    before: *start,
                    after: total - start - len,
                })?,
            ));
        }
        Pad {
            x, axis, before, ..
        } => {
            let len = tape.shape(*x)[*axis];
            out_grads.push((
                *x,
                ap(Slice {
                    x: g,
                    axis: *axis,
                    start: *before,
                    len,
                })?,
            ));
        }
        IndexSelect(x, idx) => {
            let width = tape.shape(*x)[1];
            out_grads.push((*x, ap(ScatterRows(g, idx.clone(), width))?));
        }
        ScatterRows(x, idx, _) => out_grads.push((*x, ap(IndexSelect(g, idx.clone()))?)),
        Reshape(a, _) => out_grads.push((*a, ap(Reshape(g, tape.shape(*a)))?)),
        Reverse(a, axis) => out_grads.push((*a, ap(Reverse(g, *axis))?)),
        Softmax(a, axis) => {
            // y * (g - sum(g * y))
            let y = n(out);
            let size = tape.shape(*a)[*axis];
            let dot = ap(SumAxis(ap(Mul(g.clone(), y.clone()))?, *axis))?;
            let centered = ap(Sub(g, ap(ExpandAxis(dot, *axis, size))?))?;
            out_grads.push((*a, ap(Mul(y, centered))?));
        }
        LogSoftmax(a, axis) => {
            // g - softmax * sum(g)
            let size = tape.shape(*a)[*axis];
            let p = ap(Exp(n(out)))?;
            let total = ap(ExpandAxis(ap(SumAxis(g.clone(), *axis))?, *axis, size))?;
            out_grads.push((*a, ap(Sub(g, ap(Mul(p, total))?))?));
        }
    }
    Ok(out_grads)
}

impl<T: Scalar> Tape<T> {
    fn backward_with<A: Adjoint<T>>(&self, alg: &A, loss: Var, wrt: &[Var]) -> Result<Vec<A::V>> {
        let len = self.len();
        if loss.0 >= len {
            return Err(Error::UnknownNode(loss.0));
        }
        let loss_shape = self.shape(loss);
        if loss_shape.iter().product::<usize>() != 1 {
            return Err(Error::NonScalarLoss(loss_shape));
        }
        let mut wrt_slot: HashMap<usize, usize> = HashMap::new();
        for (i, w) in wrt.iter().enumerate() {
            if w.0 >= len {
                return Err(Error::UnknownNode(w.0));
            }
            if !self.requires_grad(*w) {
                return Err(Error::NotDifferentiable(w.0));
            }
            wrt_slot.entry(w.0).or_insert(i);
        }

        // Nodes lying on some path from a wrt node; everything else is skipped.
        let lo = wrt.iter().map(|w| w.0).min().unwrap_or(loss.0 + 1);
        let mut needs = vec![false; loss.0 + 1];
        {
            let nodes = self.nodes();
            for id in lo..=loss.0 {
                let node = &nodes[id];
                needs[id] = wrt_slot.contains_key(&id)
                    || (node.requires_grad && node.op.operands().iter().any(|p| needs[p.0]));
            }
        }

        let mut found: Vec<Option<A::V>> = vec![None; wrt.len()];
        let mut grads: Vec<Option<A::V>> = vec![None; loss.0 + 1];
        if needs[loss.0] {
            grads[loss.0] = Some(alg.constant(Tensor::ones(&loss_shape)));
        }
        let need = |v: Var| needs[v.0];
        for id in (lo..=loss.0).rev() {
            if !needs[id] {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            if let Some(&slot) = wrt_slot.get(&id) {
                found[slot] = Some(g.clone());
            }
            let op = self.nodes()[id].op.clone();
            for (p, gp) in vjp(alg, self, &op, Var(id), g, &need)? {
                grads[p.0] = Some(match grads[p.0].take() {
                    None => gp,
                    Some(acc) => alg.apply(OpKind::Add(acc, gp))?,
                });
            }
        }

        Ok(wrt
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let slot = wrt_slot[&w.0];
                found[slot]
                    .clone()
                    .or_else(|| found[i].clone())
                    .unwrap_or_else(|| alg.constant(Tensor::zeros(&self.shape(*w))))
            })
            .collect())
    }

    /// Gradients of a scalar `loss` as plain tensors. Nodes that do not
    /// influence `loss` get an all-zero gradient.
    pub fn grad(&self, loss: Var, wrt: &[Var]) -> Result<Vec<Tensor<T>>> {
        let alg = Eager { tape: self };
        Ok(self
            .backward_with(&alg, loss, wrt)?
            .into_iter()
            .map(|g| Arc::try_unwrap(g).unwrap_or_else(|shared| (*shared).clone()))
            .collect())
    }

    /// Gradients recorded as new nodes on this tape, so they can be
    /// differentiated again.
    pub fn grad_graph(&self, loss: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        self.bump_generation();
        let alg = Recording { tape: self };
        self.backward_with(&alg, loss, wrt)
    }

    pub fn backward(&self, loss: Var, wrt: &[Var], create_graph: bool) -> Result<Vec<Gradient<T>>> {
        if create_graph {
            Ok(self
                .grad_graph(loss, wrt)?
                .into_iter()
                .map(Gradient::Node)
                .collect())
        } else {
            Ok(self
                .grad(loss, wrt)?
                .into_iter()
                .map(Gradient::Value)
                .collect())
        }
    }
}
