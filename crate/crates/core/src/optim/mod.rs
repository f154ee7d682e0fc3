//! SGD and RMSProp, usable off the tape (plain values) or on it, where the
//! update itself is recorded so that later gradients flow through it.


use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::nn::{ParamSet, VarSet};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    RmsProp,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::RmsProp => "rmsprop",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sgd" => Some(OptimizerKind::Sgd),
            "rmsprop" => Some(OptimizerKind::RmsProp),
            _ => None,
        }
    }
}

/// How on-tape RMSProp treats its second-moment accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffPolicy {
    /// Differentiate through the accumulator update.
    Full,
    /// The accumulator is a constant for differentiation purposes.
    StopGradAccumulators,
}

impl DiffPolicy {
    pub fn name(self) -> &'static str {
        match self {
            DiffPolicy::Full => "full",
            DiffPolicy::StopGradAccumulators => "stop_grad_accumulators",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" => Some(DiffPolicy::Full),
            "stop_grad_accumulators" => Some(DiffPolicy::StopGradAccumulators),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub decay: f64,
    pub momentum: f64,
    pub eps: f64,
    pub diff_policy: DiffPolicy,
}

impl OptimizerConfig {
    pub fn sgd(lr: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            lr,
            ..Self::rmsprop(lr)
        }
    }

    /// RMSProp with decay 0.99, ε 0.1 and no momentum.
    pub fn rmsprop(lr: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::RmsProp,
            lr,
            decay: 0.99,
            momentum: 0.0,
            eps: 0.1,
            diff_policy: DiffPolicy::StopGradAccumulators,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate {} must be finite and >= 0", self.lr)));
        }
        if !(0.0..=1.0).contains(&self.decay) {
            return Err(Error::invalid(format!("decay {} outside [0, 1]", self.decay)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::invalid(format!("eps {} must be >= 0", self.eps)));
        }
        Ok(())
    }

    fn uses_momentum(&self) -> bool {
        self.kind == OptimizerKind::RmsProp && self.momentum > 0.0
    }
}

/// Optimizer configuration plus per-parameter state.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub config: OptimizerConfig,
    /// RMSProp second moments.
    pub accumulators: Option<ParamSet<T>>,
    pub momentum: Option<ParamSet<T>>,
}

/// `θ − lr·g`.
pub fn sgd_update<T: Scalar>(params: &ParamSet<T>, grads: &ParamSet<T>, lr: T) -> Result<ParamSet<T>> {
    params.zip_map(grads, |p, g| p - lr * g)
}

/// Pure RMSProp step; returns the new state and parameters.
pub fn rmsprop_update<T: Scalar>(
    state: &OptimizerState<T>,
    params: &ParamSet<T>,
    grads: &ParamSet<T>,
) -> Result<(OptimizerState<T>, ParamSet<T>)> {
    let mut next = state.clone();
    let new_params = next.apply(params, grads)?;
    Ok((next, new_params))
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(config: OptimizerConfig, params: &ParamSet<T>) -> Self {
        let rms = config.kind == OptimizerKind::RmsProp;
        OptimizerState {
            config,
            accumulators: rms.then(|| params.zeros_like()),
            momentum: config.uses_momentum().then(|| params.zeros_like()),
        }
    }

    /// Updates the state in place and returns the new parameters.
    pub fn apply(&mut self, params: &ParamSet<T>, grads: &ParamSet<T>) -> Result<ParamSet<T>> {
        params.check_same_structure(grads)?;
        let c = self.config;
        let lr = T::lit(c.lr);
        match c.kind {
            OptimizerKind::Sgd => sgd_update(params, grads, lr),
            OptimizerKind::RmsProp => {
                let acc = self
                    .accumulators
                    .get_or_insert_with(|| params.zeros_like());
                let decay = T::lit(c.decay);
                let acc_new = acc.zip_map(grads, |a, g| decay * a + (T::one() - decay) * g * g)?;
                let eps = T::lit(c.eps);
                let steps = grads
                    .zip_map(&acc_new, |g, a| lr * g / (a.sqrt() + eps))?;
                *acc = acc_new;
                let steps = match &mut self.momentum {
                    Some(m) => {
                        let mu = T::lit(c.momentum);
                        *m = m.zip_map(&steps, |m, s| mu * m + s)?;
                        m.clone()
                    }
                    None => steps,
                };
                params.sub(&steps)
            }
        }
    }

    /// Places the state on a tape as constants.
    pub fn to_tape(&self, tape: &Tape<T>) -> TapeOptState {
        TapeOptState {
            config: self.config,
            accumulators: self.accumulators.as_ref().map(|a| a.to_tape(tape, false)),
            momentum: self.momentum.as_ref().map(|m| m.to_tape(tape, false)),
        }
    }
}

/// Optimizer state whose tensors live on a tape.
#[derive(Debug, Clone, PartialEq)]
pub struct TapeOptState {
    pub config: OptimizerConfig,
    pub accumulators: Option<VarSet>,
    pub momentum: Option<VarSet>,
}

impl TapeOptState {
    /// Records one update. Returns the new state and parameter nodes.
    pub fn step<T: Scalar>(&self, tape: &Tape<T>, params: &VarSet, grads: &VarSet) -> Result<(TapeOptState, VarSet)> {
        self.step_with(tape, params, grads, None)
    }

    /// Like [`step`](Self::step), but an RMSProp accumulator given in
    /// `frozen` replaces the computed one as a constant. Holding it fixed
    /// while perturbing inputs gives the function whose derivative the
    /// stop-gradient policy computes.
    pub fn step_with<T: Scalar>(
        &self,
        tape: &Tape<T>,
        params: &VarSet,
        grads: &VarSet,
        frozen: Option<&ParamSet<T>>,
    ) -> Result<(TapeOptState, VarSet)> {
        let c = self.config;
        let lr = T::lit(c.lr);
        let names: Vec<String> = params.names().map(str::to_string).collect();
        if grads.names().ne(names.iter().map(String::as_str)) {
            return Err(Error::StructureMismatch("gradients do not match parameters".into()));
        }
        let mut next = self.clone();
        let mut new_params = Vec::with_capacity(names.len());
        let mut new_acc = Vec::new();
        let mut new_mom = Vec::new();
        for name in &names {
            let p = params.get(name)?;
            let g = grads.get(name)?;
            let step = match c.kind {
                OptimizerKind::Sgd => tape.scale(g, lr)?,
                OptimizerKind::RmsProp => {
                    let decay = T::lit(c.decay);
                    let acc = self.accumulators.as_ref().map(|a| a.get(name)).transpose()?;
                    let fresh = tape.scale(tape.square(g)?, T::one() - decay)?;
                    let mut a = match acc {
                        Some(a) => tape.add(tape.scale(a, decay)?, fresh)?,
                        None => fresh,
                    };
                    if let Some(f) = frozen {
                        a = tape.constant(f.get(name)?.clone());
                    } else if c.diff_policy == DiffPolicy::StopGradAccumulators {
                        a = tape.stop_gradient(a)?;
                    }
                    new_acc.push(a);
                    let denom = tape.shift(tape.sqrt(a)?, T::lit(c.eps))?;
                    let s = tape.scale(tape.div(g, denom)?, lr)?;
                    match &self.momentum {
                        Some(m) => {
                            let m = tape.add(tape.scale(m.get(name)?, T::lit(c.momentum))?, s)?;
                            new_mom.push(m);
                            m
                        }
                        None => s,
                    }
                }
            };
            new_params.push(tape.sub(p, step)?);
        }
        if c.kind == OptimizerKind::RmsProp {
            next.accumulators = Some(params.with_vars(new_acc)?);
        }
        if self.momentum.is_some() {
            next.momentum = Some(params.with_vars(new_mom)?);
        }
        Ok((next, params.with_vars(new_params)?))
    }

    /// Detached copy of the current state.
    pub fn values<T: Scalar>(&self, tape: &Tape<T>) -> OptimizerState<T> {
        OptimizerState {
            config: self.config,
            accumulators: self.accumulators.as_ref().map(|a| a.values(tape)),
            momentum: self.momentum.as_ref().map(|m| m.values(tape)),
        }
    }
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
pub fn clip_global_norm<T: Scalar>(grads: &ParamSet<T>, max_norm: T) -> ParamSet<T> {
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm)
    } else {
        grads.clone()
    }
}

/// Joint L2 norm of a set of nodes, recorded on the tape.
pub fn global_norm_on_tape<T: Scalar>(tape: &Tape<T>, grads: &VarSet) -> Result<Var> {
    let mut total = tape.constant(Tensor::scalar(T::zero()));
    for v in grads.vars() {
        total = tape.add(total, tape.sum(tape.square(v)?)?)?;
    }
    tape.sqrt(total)
}

/// On-tape [`clip_global_norm`]; the rescaling is differentiated through.
pub fn clip_global_norm_on_tape<T: Scalar>(tape: &Tape<T>, grads: &VarSet, max_norm: T) -> Result<VarSet> {
    let norm = global_norm_on_tape(tape, grads)?;
    if tape.item(norm) <= max_norm {
        return Ok(grads.clone());
    }
    let factor = tape.div(tape.scalar(max_norm), norm)?;
    let scaled = grads
        .vars()
        .into_iter()
        .map(|v| tape.mul(factor, v))
        .collect::<Result<Vec<_>>>()?;
    grads.with_vars(scaled)
}
