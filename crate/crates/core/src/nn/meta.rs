use std::collections::BTreeMap;

use super::init::{ParamShape, ParamSpec};
use super::lstm::LstmCell;
use super::mlp::linear;
use super::params::VarSet;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-step quantities the meta-network can consume. All are aligned with
/// transition `t` of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetaFeature {
    /// `R_{t+1}`
    Reward,
    /// `γ_{t+1}`
    Discount,
    /// `v(S_{t+1})`
    NextValue,
    /// `v(S_t)`; only used when the meta-network parameterises a loss.
    Value,
    /// `π(A_t | S_t)`
    PiProb,
    /// `μ(A_t | S_t)`
    MuProb,
}

impl MetaFeature {
    pub fn name(self) -> &'static str {
        match self {
            MetaFeature::Reward => "reward",
            MetaFeature::Discount => "discount",
            MetaFeature::NextValue => "next_value",
            MetaFeature::Value => "value",
            MetaFeature::PiProb => "pi",
            MetaFeature::MuProb => "mu",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            MetaFeature::Reward,
            MetaFeature::Discount,
            MetaFeature::NextValue,
            MetaFeature::Value,
            MetaFeature::PiProb,
            MetaFeature::MuProb,
        ]
        .into_iter()
        .find(|f| f.name() == s)
    }
}

/// Feature vectors (each shape `[T]`) fed to the meta-network.
#[derive(Debug, Clone, Default)]
pub struct MetaInputs {
    features: BTreeMap<MetaFeature, Var>,
}

impl MetaInputs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, feature: MetaFeature, v: Var) -> Self {
        self.features.insert(feature, v);
        self
    }

    pub fn set(&mut self, feature: MetaFeature, v: Var) {
        self.features.insert(feature, v);
    }

    pub fn get(&self, feature: MetaFeature) -> Option<Var> {
        self.features.get(&feature).copied()
    }
}

/// Recurrent target network `g_η`: an LSTM run over the trajectory from the
/// last step to the first, with a linear scalar readout per step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaNetwork {
    pub features: Vec<MetaFeature>,
    pub hidden: usize,
}

impl MetaNetwork {
    pub const PREFIX: &'static str = "meta";

    pub fn new(features: Vec<MetaFeature>, hidden: usize) -> Self {
        MetaNetwork { features, hidden }
    }

    pub fn cell(&self) -> LstmCell {
        LstmCell::new(
            format!("{}/lstm", Self::PREFIX),
            self.features.len(),
            self.hidden,
        )
    }

    fn readout_names() -> (String, String) {
        (
            format!("{}/readout/w", Self::PREFIX),
            format!("{}/readout/b", Self::PREFIX),
        )
    }

    /// One target per step, shape `[T]`, in forward time order.
    pub fn forward<T: Scalar>(&self, tape: &Tape<T>, params: &VarSet, inputs: &MetaInputs) -> Result<Var> {
        let mut columns = Vec::with_capacity(self.features.len());
        let mut steps = None;
        for &f in &self.features {
            let v = inputs
                .get(f)
                .ok_or_else(|| Error::invalid(format!("meta input `{}` missing", f.name())))?;
            let s = tape.shape(v);
            if s.len() != 1 {
                return Err(Error::shape("meta input", &s, &[]));
            }
            match steps {
                None => steps = Some(s[0]),
                Some(n) if n != s[0] => {
                    return Err(Error::LengthMismatch {
                        what: f.name(),
                        got: s[0],
                        expected: n,
                    })
                }
                _ => {}
            }
            columns.push(tape.reshape(v, &[s[0], 1])?);
        }
        let steps = steps.ok_or_else(|| Error::invalid("meta-network has no input features"))?;
        if steps == 0 {
            return Err(Error::invalid("empty trajectory"));
        }

        let cell = self.cell();
        let x = tape.concat(&columns, 1)?;
        let proj = cell.project_inputs(tape, params, x)?;
        let zero = Tensor::zeros(&[1, self.hidden]);
        let mut h = tape.constant(zero.clone());
        let mut c = tape.constant(zero);
        let mut hidden_rows = vec![h; steps];
        for t in (0..steps).rev() {
            let row = tape.slice(proj, 0, t, 1)?;
            (h, c) = cell.step_projected(tape, params, row, h, c)?;
            hidden_rows[t] = h;
        }
        let hs = tape.concat(&hidden_rows, 0)?;
        let (w, b) = Self::readout_names();
        let out = linear(tape, params.get(&w)?, params.get(&b)?, hs)?;
        tape.reshape(out, &[steps])
    }
}

impl ParamSpec for MetaNetwork {
    fn param_shapes(&self) -> Vec<ParamShape> {
        let mut shapes = self.cell().param_shapes();
        let (w, b) = Self::readout_names();
        shapes.push(ParamShape::weight(w, self.hidden, 1));
        shapes.push(ParamShape::bias(b, 1));
        shapes
    }
}

/// Free-function form of [`MetaNetwork::forward`].
pub fn meta_forward<T: Scalar>(
    meta: &MetaNetwork,
    tape: &Tape<T>,
    params: &VarSet,
    inputs: &MetaInputs,
) -> Result<Var> {
    meta.forward(tape, params, inputs)
}
