use super::init::{ParamShape, ParamSpec};
use super::mlp::{linear, Mlp};
use super::params::{ParamSet, VarSet};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    /// State value only.
    Value,
    /// Policy logits plus a state value.
    ActorCritic { num_actions: usize },
    /// One action value per action.
    ActionValue { num_actions: usize },
}

/// MLP torso with linear heads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentNetwork {
    pub obs_dim: usize,
    /// Torso widths; empty means the heads read the observation directly.
    pub hidden: Vec<usize>,
    pub head: Head,
}

#[derive(Debug, Clone, Copy)]
pub struct AgentOutput {
    /// `[N]`
    pub values: Option<Var>,
    /// `[N, A]`
    pub logits: Option<Var>,
    /// `[N, A]`
    pub q: Option<Var>,
}

impl AgentOutput {
    pub fn values(&self) -> Result<Var> {
        self.values
            .ok_or_else(|| Error::invalid("agent network has no value head"))
    }

    pub fn logits(&self) -> Result<Var> {
        self.logits
            .ok_or_else(|| Error::invalid("agent network has no policy head"))
    }

    pub fn q(&self) -> Result<Var> {
        self.q
            .ok_or_else(|| Error::invalid("agent network has no action-value head"))
    }
}

impl AgentNetwork {
    pub fn new(obs_dim: usize, hidden: Vec<usize>, head: Head) -> Self {
        AgentNetwork {
            obs_dim,
            hidden,
            head,
        }
    }

    pub fn num_actions(&self) -> usize {
        match self.head {
            Head::Value => 1,
            Head::ActorCritic { num_actions } | Head::ActionValue { num_actions } => num_actions,
        }
    }

    fn torso(&self) -> Option<Mlp> {
        if self.hidden.is_empty() {
            return None;
        }
        let mut sizes = vec![self.obs_dim];
        sizes.extend(&self.hidden);
        Some(Mlp::new("agent/torso", sizes, true))
    }

    fn feature_width(&self) -> usize {
        self.hidden.last().copied().unwrap_or(self.obs_dim)
    }

    fn head(tape_names: &str) -> (String, String) {
        (format!("agent/{tape_names}/w"), format!("agent/{tape_names}/b"))
    }

    /// Runs the network on a batch of observations `[N, obs_dim]`.
    pub fn forward<T: Scalar>(&self, tape: &Tape<T>, params: &VarSet, obs: Var) -> Result<AgentOutput> {
        let s = tape.shape(obs);
        if s.len() != 2 || s[1] != self.obs_dim {
            return Err(Error::shape("agent observations", &s, &[self.obs_dim]));
        }
        let n = s[0];
        let feat = match self.torso() {
            Some(mlp) => mlp.forward(tape, params, obs)?,
            None => obs,
        };
        let head = |name: &str| -> Result<Var> {
            let (w, b) = Self::head(name);
            linear(tape, params.get(&w)?, params.get(&b)?, feat)
        };
        let mut out = AgentOutput {
            values: None,
            logits: None,
            q: None,
        };
        match self.head {
            Head::Value => {
                out.values = Some(tape.reshape(head("value")?, &[n])?);
            }
            Head::ActorCritic { .. } => {
                out.values = Some(tape.reshape(head("value")?, &[n])?);
                out.logits = Some(head("policy")?);
            }
            Head::ActionValue { .. } => {
                out.q = Some(head("q")?);
            }
        }
        Ok(out)
    }

    /// Action probabilities for a single observation, off the training tape.
    /// For action-value heads this is the greedy policy mixed with
    /// `epsilon`-uniform exploration.
    pub fn action_probs<T: Scalar>(&self, params: &ParamSet<T>, obs: &[f64], epsilon: f64) -> Result<Vec<f64>> {
        let a = self.num_actions();
        if let Head::Value = self.head {
            return Ok(vec![1.0 / a as f64; a]);
        }
        let tape = Tape::new();
        let vars = params.to_tape(&tape, false);
        let x = tape.constant(Tensor::from_f64(&[1, obs.len()], obs)?);
        let out = self.forward(&tape, &vars, x)?;
        match self.head {
            Head::ActorCritic { .. } => {
                let p = tape.softmax(out.logits()?, 1)?;
                Ok(tape.value(p).to_f64_vec())
            }
            _ => {
                let q = tape.value(out.q()?).to_f64_vec();
                let best = q
                    .iter()
                    .enumerate()
                    .fold(0, |b, (i, &v)| if v > q[b] { i } else { b });
                let mut p = vec![epsilon / a as f64; a];
                p[best] += 1.0 - epsilon;
                Ok(p)
            }
        }
    }

    /// State values for a batch of observations, off the training tape.
    pub fn evaluate_values<T: Scalar>(&self, params: &ParamSet<T>, obs: &Tensor<T>) -> Result<Vec<f64>> {
        let tape = Tape::new();
        let vars = params.to_tape(&tape, false);
        let x = tape.constant(obs.clone());
        let v = self.forward(&tape, &vars, x)?.values()?;
        Ok(tape.value(v).to_f64_vec())
    }
}

impl ParamSpec for AgentNetwork {
    fn param_shapes(&self) -> Vec<ParamShape> {
        let mut shapes = self.torso().map(|m| m.param_shapes()).unwrap_or_default();
        let width = self.feature_width();
        let mut push_head = |name: &str, out: usize| {
            let (w, b) = Self::head(name);
            shapes.push(ParamShape::weight(w, width, out));
            shapes.push(ParamShape::bias(b, out));
        };
        match self.head {
            Head::Value => push_head("value", 1),
            Head::ActorCritic { num_actions } => {
                push_head("value", 1);
                push_head("policy", num_actions);
            }
            Head::ActionValue { num_actions } => push_head("q", num_actions),
        }
        shapes
    }
}
