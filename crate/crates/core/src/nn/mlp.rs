use super::init::{ParamShape, ParamSpec};
use super::params::VarSet;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `x @ w + b` for a batch `x: [n, in]`, `w: [in, out]`, `b: [out]`.
pub fn linear<T: Scalar>(tape: &Tape<T>, w: Var, b: Var, x: Var) -> Result<Var> {
    let xs = tape.shape(x);
    if xs.len() != 2 {
        return Err(Error::shape("linear", &xs, &tape.shape(w)));
    }
    let y = tape.matmul(x, w)?;
    let bias = tape.expand_axis(b, 0, xs[0])?;
    tape.add(y, bias)
}

/// Fully connected stack with tanh between layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    pub prefix: String,
    /// Layer widths including the input, e.g. `[66, 256, 256]`.
    pub sizes: Vec<usize>,
    /// Apply tanh after the last layer as well.
    pub activate_output: bool,
}

impl Mlp {
    pub fn new(prefix: impl Into<String>, sizes: Vec<usize>, activate_output: bool) -> Self {
        Mlp {
            prefix: prefix.into(),
            sizes,
            activate_output,
        }
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().expect("at least one width")
    }

    fn layer_names(&self, i: usize) -> (String, String) {
        (
            format!("{}/{}/w", self.prefix, i),
            format!("{}/{}/b", self.prefix, i),
        )
    }

    pub fn forward<T: Scalar>(&self, tape: &Tape<T>, params: &VarSet, x: Var) -> Result<Var> {
        let xs = tape.shape(x);
        if xs.len() != 2 || xs[1] != self.input_size() {
            return Err(Error::shape("mlp_forward", &xs, &[self.input_size()]));
        }
        let layers = self.sizes.len() - 1;
        let mut h = x;
        for i in 0..layers {
            let (w, b) = self.layer_names(i);
            h = linear(tape, params.get(&w)?, params.get(&b)?, h)?;
            if i + 1 < layers || self.activate_output {
                h = tape.tanh(h)?;
            }
        }
        Ok(h)
    }
}

impl ParamSpec for Mlp {
    fn param_shapes(&self) -> Vec<ParamShape> {
        self.sizes
            .windows(2)
            .enumerate()
            .flat_map(|(i, pair)| {
                let (w, b) = self.layer_names(i);
                [ParamShape::weight(w, pair[0], pair[1]), ParamShape::bias(b, pair[1])]
            })
            .collect()
    }
}

/// Free-function form of [`Mlp::forward`].
pub fn mlp_forward<T: Scalar>(mlp: &Mlp, tape: &Tape<T>, params: &VarSet, x: Var) -> Result<Var> {
    mlp.forward(tape, params, x)
}
