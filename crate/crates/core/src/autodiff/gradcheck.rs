//! Central finite differences, used as an oracle against the tape.

use super::tensor::Tensor;
use crate::scalar::Scalar;

/// Central-difference gradient of a scalar function at `x`.
pub fn numeric_gradient<T: Scalar>(f: impl Fn(&Tensor<T>) -> T, x: &Tensor<T>, h: T) -> Tensor<T> {
    let mut probe = x.clone();
    let mut out = Vec::with_capacity(x.numel());
    let two_h = h + h;
    for i in 0..x.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = f(&probe);
        probe.data_mut()[i] = orig - h;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        out.push((up - down) / two_h);
    }
    Tensor::new(x.shape().to_vec(), out).expect("same shape as input")
}

/// Largest `|a - b| / (1 + |b|)` over all entries.
pub fn max_relative_error<T: Scalar>(analytic: &Tensor<T>, numeric: &Tensor<T>) -> T {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &b)| (a - b).abs() / (T::one() + b.abs()))
        .fold(T::zero(), T::max)
}
