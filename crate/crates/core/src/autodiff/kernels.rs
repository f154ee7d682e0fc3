//! Forward kernels on plain tensors.

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Elementwise op on equal shapes, or with one rank-0 operand broadcast.
pub fn binary<T: Scalar>(
    op: &'static str,
    a: &Tensor<T>,
    b: &Tensor<T>,
    f: impl Fn(T, T) -> T,
) -> Result<Tensor<T>> {
    if a.shape() == b.shape() {
        let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(a.shape().to_vec(), data)
    } else if a.is_scalar() {
        let x = a.item();
        Ok(b.map(|y| f(x, y)))
    } else if b.is_scalar() {
        let y = b.item();
        Ok(a.map(|x| f(x, y)))
    } else {
        Err(Error::shape(op, a.shape(), b.shape()))
    }
}

/// `(outer, n, inner)` decomposition of a shape around `axis`.
fn split_axis(shape: &[usize], axis: usize) -> Result<(usize, usize, usize)> {
    if axis >= shape.len() {
        return Err(Error::InvalidAxis {
            axis,
            shape: shape.to_vec(),
        });
    }
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    Ok((outer, shape[axis], inner))
}

pub fn sum_axis<T: Scalar>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    let (outer, n, inner) = split_axis(x.shape(), axis)?;
    let src = x.data();
    let mut out = vec![T::zero(); outer * inner];
    for o in 0..outer {
        for i in 0..n {
            let row = &src[(o * n + i) * inner..(o * n + i + 1) * inner];
            for (acc, &v) in out[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                *acc += v;
            }
        }
    }
    let mut shape = x.shape().to_vec();
    shape.remove(axis);
    Tensor::new(shape, out)
}

pub fn expand_axis<T: Scalar>(x: &Tensor<T>, axis: usize, n: usize) -> Result<Tensor<T>> {
    if axis > x.rank() {
        return Err(Error::InvalidAxis {
            axis,
            shape: x.shape().to_vec(),
        });
    }
    let outer: usize = x.shape()[..axis].iter().product();
    let inner: usize = x.shape()[axis..].iter().product();
    let src = x.data();
    let mut out = Vec::with_capacity(outer * n * inner);
    for o in 0..outer {
        let block = &src[o * inner..(o + 1) * inner];
        for _ in 0..n {
            out.extend_from_slice(block);
        }
    }
    let mut shape = x.shape().to_vec();
    shape.insert(axis, n);
    Tensor::new(shape, out)
}

pub fn broadcast<T: Scalar>(x: &Tensor<T>, shape: &[usize]) -> Result<Tensor<T>> {
    if x.numel() != 1 {
        return Err(Error::shape("broadcast", x.shape(), shape));
    }
    Ok(Tensor::full(shape, x.item()))
}

pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0] {
        return Err(Error::shape("matmul", a.shape(), b.shape()));
    }
    let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = ad[i * k + p];
            if aip == T::zero() {
                continue;
            }
            let b_row = &bd[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aip * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

pub fn transpose<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    if x.rank() != 2 {
        return Err(Error::shape("transpose", x.shape(), &[]));
    }
    let (r, c) = (x.shape()[0], x.shape()[1]);
    let src = x.data();
    let mut out = vec![T::zero(); r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = src[i * c + j];
        }
    }
    Tensor::new(vec![c, r], out)
}

pub fn concat<T: Scalar>(parts: &[&Tensor<T>], axis: usize) -> Result<Tensor<T>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::invalid("concat of zero tensors"))?;
    let (outer, _, inner) = split_axis(first.shape(), axis)?;
    let mut total = 0;
    for p in parts {
        let ok = p.rank() == first.rank()
            && p.shape()
                .iter()
                .zip(first.shape())
                .enumerate()
                .all(|(d, (x, y))| d == axis || x == y);
        if !ok {
            return Err(Error::shape("concat", first.shape(), p.shape()));
        }
        total += p.shape()[axis];
    }
    let mut out = Vec::with_capacity(outer * total * inner);
    for o in 0..outer {
        for p in parts {
            let n = p.shape()[axis];
            out.extend_from_slice(&p.data()[o * n * inner..(o + 1) * n * inner]);
        }
    }
    let mut shape = first.shape().to_vec();
    shape[axis] = total;
    Tensor::new(shape, out)
}

pub fn slice<T: Scalar>(x: &Tensor<T>, axis: usize, start: usize, len: usize) -> Result<Tensor<T>> {
    let (outer, n, inner) = split_axis(x.shape(), axis)?;
    if start + len > n {
        return Err(Error::IndexOutOfRange {
            index: start + len,
            bound: n,
        });
    }
    let src = x.data();
    let mut out = Vec::with_capacity(outer * len * inner);
    for o in 0..outer {
        out.extend_from_slice(&src[(o * n + start) * inner..(o * n + start + len) * inner]);
    }
    let mut shape = x.shape().to_vec();
    shape[axis] = len;
    Tensor::new(shape, out)
}

pub fn pad<T: Scalar>(x: &Tensor<T>, axis: usize, before: usize, after: usize) -> Result<Tensor<T>> {
    let (outer, n, inner) = split_axis(x.shape(), axis)?;
    let total = before + n + after;
    let src = x.data();
    let mut out = vec![T::zero(); outer * total * inner];
    for o in 0..outer {
        let dst = (o * total + before) * inner;
        out[dst..dst + n * inner].copy_from_slice(&src[o * n * inner..(o + 1) * n * inner]);
    }
    let mut shape = x.shape().to_vec();
    shape[axis] = total;
    Tensor::new(shape, out)
}

pub fn index_select<T: Scalar>(x: &Tensor<T>, idx: &[usize]) -> Result<Tensor<T>> {
    if x.rank() != 2 || x.shape()[0] != idx.len() {
        return Err(Error::shape("index_select", x.shape(), &[idx.len()]));
    }
    let width = x.shape()[1];
    let mut out = Vec::with_capacity(idx.len());
    for (row, &i) in idx.iter().enumerate() {
        if i >= width {
            return Err(Error::IndexOutOfRange {
                index: i,
                bound: width,
            });
        }
        out.push(x.data()[row * width + i]);
    }
    Ok(Tensor::vector(out))
}

pub fn scatter_rows<T: Scalar>(x: &Tensor<T>, idx: &[usize], width: usize) -> Result<Tensor<T>> {
    if x.rank() != 1 || x.numel() != idx.len() {
        return Err(Error::shape("scatter_rows", x.shape(), &[idx.len()]));
    }
    let mut out = vec![T::zero(); idx.len() * width];
    for (row, (&i, &v)) in idx.iter().zip(x.data()).enumerate() {
        if i >= width {
            return Err(Error::IndexOutOfRange {
                index: i,
                bound: width,
            });
        }
        out[row * width + i] = v;
    }
    Tensor::new(vec![idx.len(), width], out)
}

pub fn reverse<T: Scalar>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    let (outer, n, inner) = split_axis(x.shape(), axis)?;
    let src = x.data();
    let mut out = Vec::with_capacity(src.len());
    for o in 0..outer {
        for i in (0..n).rev() {
            out.extend_from_slice(&src[(o * n + i) * inner..(o * n + i + 1) * inner]);
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

/// Applies `f` to every 1-D lane along `axis`.
fn along_axis<T: Scalar>(
    x: &Tensor<T>,
    axis: usize,
    f: impl Fn(&[T], &mut [T]),
) -> Result<Tensor<T>> {
    let (outer, n, inner) = split_axis(x.shape(), axis)?;
    let src = x.data();
    let mut out = vec![T::zero(); src.len()];
    let mut lane = vec![T::zero(); n];
    let mut res = vec![T::zero(); n];
    for o in 0..outer {
        for j in 0..inner {
            for i in 0..n {
                lane[i] = src[(o * n + i) * inner + j];
            }
            f(&lane, &mut res);
            for i in 0..n {
                out[(o * n + i) * inner + j] = res[i];
            }
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

fn lane_max<T: Scalar>(lane: &[T]) -> T {
    lane.iter().copied().fold(T::neg_infinity(), T::max)
}

pub fn softmax<T: Scalar>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    along_axis(x, axis, |lane, out| {
        let m = lane_max(lane);
        let mut z = T::zero();
        for (o, &v) in out.iter_mut().zip(lane) {
            *o = (v - m).exp();
            z += *o;
        }
        for o in out.iter_mut() {
            *o /= z;
        }
    })
}

pub fn log_softmax<T: Scalar>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    along_axis(x, axis, |lane, out| {
        let m = lane_max(lane);
        let z: T = lane.iter().map(|&v| (v - m).exp()).sum();
        let lz = z.ln() + m;
        for (o, &v) in out.iter_mut().zip(lane) {
            *o = v - lz;
        }
    })
}
