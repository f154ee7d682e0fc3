use std::collections::BTreeMap;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Named tensors, iterated in name order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet<T> {
    entries: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::StructureMismatch(format!("duplicate parameter `{name}`")));
        }
        self.entries.insert(name, value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        self.entries
            .get_mut(name)
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar entries.
    pub fn numel(&self) -> usize {
        self.entries.values().map(Tensor::numel).sum()
    }

    pub fn check_same_structure(&self, other: &Self) -> Result<()> {
        if self.entries.len() != other.entries.len() {
            return Err(Error::StructureMismatch(format!(
                "{} entries vs {}",
                self.entries.len(),
                other.entries.len()
            )));
        }
        for ((ka, va), (kb, vb)) in self.entries.iter().zip(&other.entries) {
            if ka != kb || va.shape() != vb.shape() {
                return Err(Error::StructureMismatch(format!(
                    "`{ka}` {:?} vs `{kb}` {:?}",
                    va.shape(),
                    vb.shape()
                )));
            }
        }
        Ok(())
    }

    /// Elementwise combination of two sets with identical structure.
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_structure(other)?;
        let mut out = BTreeMap::new();
        for ((k, a), b) in self.entries.iter().zip(other.entries.values()) {
            out.insert(k.clone(), a.zip_map(b, &f)?);
        }
        Ok(ParamSet { entries: out })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), v.map(&f)))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|a| a * c)
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|_| T::zero())
    }

    /// L2 norm over every entry of every tensor.
    pub fn global_norm(&self) -> T {
        self.entries
            .values()
            .map(Tensor::sum_squares)
            .sum::<T>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.values().all(Tensor::is_finite)
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        let d = self.zip_map(other, |a, b| (a - b).abs())?;
        Ok(d.entries
            .values()
            .flat_map(|t| t.data().iter().copied())
            .fold(T::zero(), T::max))
    }

    /// Places every tensor on the tape as a leaf.
    pub fn to_tape(&self, tape: &Tape<T>, requires_grad: bool) -> VarSet {
        VarSet {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), tape.leaf(v.clone(), requires_grad)))
                .collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
        }
    }
}

impl<T: Scalar> FromIterator<(String, Tensor<T>)> for ParamSet<T> {
    fn from_iter<I: IntoIterator<Item = (String, Tensor<T>)>>(iter: I) -> Self {
        ParamSet {
            entries: iter.into_iter().collect(),
        }
    }
}

/// A [`ParamSet`] living on a tape: one node per named tensor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VarSet {
    entries: BTreeMap<String, Var>,
}

impl VarSet {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.entries
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingParam(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Nodes in name order.
    pub fn vars(&self) -> Vec<Var> {
        self.entries.values().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rebuilds a set from nodes given in name order.
    pub fn with_vars(&self, vars: Vec<Var>) -> Result<VarSet> {
        if vars.len() != self.entries.len() {
            return Err(Error::LengthMismatch {
                what: "vars",
                got: vars.len(),
                expected: self.entries.len(),
            });
        }
        Ok(VarSet {
            entries: self.entries.keys().cloned().zip(vars).collect(),
        })
    }

    /// Current values as a detached parameter set.
    pub fn values<T: Scalar>(&self, tape: &Tape<T>) -> ParamSet<T> {
        self.entries
            .iter()
            .map(|(k, v)| (k.clone(), (*tape.value(*v)).clone()))
            .collect()
    }

    /// Gradients of `loss` for every entry, as plain tensors.
    pub fn grad<T: Scalar>(&self, tape: &Tape<T>, loss: Var) -> Result<ParamSet<T>> {
        let grads = tape.grad(loss, &self.vars())?;
        Ok(self.entries.keys().cloned().zip(grads).collect())
    }

    /// Gradients of `loss` recorded on the tape.
    pub fn grad_graph<T: Scalar>(&self, tape: &Tape<T>, loss: Var) -> Result<VarSet> {
        let grads = tape.grad_graph(loss, &self.vars())?;
        self.with_vars(grads)
    }
}

impl FromIterator<(String, Var)> for VarSet {
    fn from_iter<I: IntoIterator<Item = (String, Var)>>(iter: I) -> Self {
        VarSet {
            entries: iter.into_iter().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(vals: &[(&str, &[f64])]) -> ParamSet<f64> {
        vals.iter()
            .map(|(k, v)| (k.to_string(), Tensor::vector(v.to_vec())))
            .collect()
    }

    #[test]
    fn arithmetic_requires_same_structure() {
        let a = set(&[("a", &[1., 2.]), ("b", &[3.])]);
        let b = set(&[("a", &[1., 1.]), ("b", &[1.])]);
        assert_eq!(a.sub(&b).unwrap(), set(&[("a", &[0., 1.]), ("b", &[2.])]));
        let c = set(&[("a", &[1., 1.])]);
        assert!(a.add(&c).is_err());
        let d = set(&[("a", &[1.]), ("b", &[1.])]);
        assert!(a.add(&d).is_err());
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut p = ParamSet::<f64>::new();
        p.insert("w", Tensor::scalar(1.0)).unwrap();
        assert!(p.insert("w", Tensor::scalar(2.0)).is_err());
    }

    #[test]
    fn global_norm_is_l2_over_everything() {
        let a = set(&[("a", &[3.]), ("b", &[4.])]);
        assert_eq!(a.global_norm(), 5.0);
    }

    #[test]
    fn round_trip_through_tape() {
        let a = set(&[("a", &[1., 2.]), ("b", &[3.])]);
        let tape = Tape::new();
        let v = a.to_tape(&tape, true);
        assert_eq!(v.values(&tape), a);
        let sq: Vec<Var> = v.vars().iter().map(|&x| tape.square(x).unwrap()).collect();
        let s: Vec<Var> = sq.iter().map(|&x| tape.sum(x).unwrap()).collect();
        let l = tape.add(s[0], s[1]).unwrap();
        let g = v.grad(&tape, l).unwrap();
        assert_eq!(g, set(&[("a", &[2., 4.]), ("b", &[6.])]));
    }
}
