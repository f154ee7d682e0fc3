use super::init::{ParamShape, ParamSpec};
use super::params::VarSet;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Standard LSTM cell. Gate blocks in the fused weights are ordered
/// input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LstmCell {
    pub prefix: String,
    pub input_size: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new(prefix: impl Into<String>, input_size: usize, hidden: usize) -> Self {
        LstmCell {
            prefix: prefix.into(),
            input_size,
            hidden,
        }
    }

    pub fn wx_name(&self) -> String {
        format!("{}/wx", self.prefix)
    }

    pub fn wh_name(&self) -> String {
        format!("{}/wh", self.prefix)
    }

    pub fn bias_name(&self) -> String {
        format!("{}/b", self.prefix)
    }

    /// Input projection `x @ wx + b` for a batch of rows `x: [n, input_size]`.
    pub fn project_inputs<T: Scalar>(&self, tape: &Tape<T>, params: &VarSet, x: Var) -> Result<Var> {
        let xs = tape.shape(x);
        if xs.len() != 2 || xs[1] != self.input_size {
            return Err(Error::shape("lstm input", &xs, &[self.input_size]));
        }
        super::mlp::linear(
            tape,
            params.get(&self.wx_name())?,
            params.get(&self.bias_name())?,
            x,
        )
    }

    /// One step from an already projected input row `[1, 4 * hidden]`.
    pub fn step_projected<T: Scalar>(
        &self,
        tape: &Tape<T>,
        params: &VarSet,
        x_proj: Var,
        h: Var,
        c: Var,
    ) -> Result<(Var, Var)> {
        let hs = self.hidden;
        for v in [h, c] {
            let s = tape.shape(v);
            if s != [1, hs] {
                return Err(Error::shape("lstm state", &s, &[1, hs]));
            }
        }
        let rec = tape.matmul(h, params.get(&self.wh_name())?)?;
        let gates = tape.add(x_proj, rec)?;
        let i = tape.sigmoid(tape.slice(gates, 1, 0, hs)?)?;
        let f = tape.sigmoid(tape.slice(gates, 1, hs, hs)?)?;
        let g = tape.tanh(tape.slice(gates, 1, 2 * hs, hs)?)?;
        let o = tape.sigmoid(tape.slice(gates, 1, 3 * hs, hs)?)?;
        let c_next = tape.add(tape.mul(f, c)?, tape.mul(i, g)?)?;
        let h_next = tape.mul(o, tape.tanh(c_next)?)?;
        Ok((h_next, c_next))
    }

    /// One step from a raw input row `x: [1, input_size]`.
    pub fn step<T: Scalar>(
        &self,
        tape: &Tape<T>,
        params: &VarSet,
        x: Var,
        h: Var,
        c: Var,
    ) -> Result<(Var, Var)> {
        let xp = self.project_inputs(tape, params, x)?;
        self.step_projected(tape, params, xp, h, c)
    }
}

impl ParamSpec for LstmCell {
    fn param_shapes(&self) -> Vec<ParamShape> {
        let g = 4 * self.hidden;
        vec![
            ParamShape::weight(self.wx_name(), self.input_size, g),
            ParamShape::weight(self.wh_name(), self.hidden, g),
            ParamShape::bias(self.bias_name(), g),
        ]
    }
}

/// Free-function form of [`LstmCell::step`].
pub fn lstm_step<T: Scalar>(
    cell: &LstmCell,
    tape: &Tape<T>,
    params: &VarSet,
    x: Var,
    h: Var,
    c: Var,
) -> Result<(Var, Var)> {
    cell.step(tape, params, x, h, c)
}
