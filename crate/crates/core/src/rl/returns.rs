//! Classic return targets over a window of `T` transitions.
//!
//! Indexing follows the trajectory layout: `rewards[t]` is `R_{t+1}`,
//! `discounts[t]` is `γ_{t+1}` and `values[t]` is `v(S_t)` for `t` in `0..=T`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) fn check_len(what: &'static str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::LengthMismatch { what, got, expected });
    }
    Ok(())
}

/// `G_t = r_{t+1} + γ_{t+1} G_{t+1}` with `G_T = bootstrap`.
pub fn discounted_returns<T: Scalar>(rewards: &[T], discounts: &[T], bootstrap: T) -> Result<Vec<T>> {
    check_len("discounts", discounts.len(), rewards.len())?;
    let mut out = vec![T::zero(); rewards.len()];
    let mut g = bootstrap;
    for t in (0..rewards.len()).rev() {
        g = rewards[t] + discounts[t] * g;
        out[t] = g;
    }
    Ok(out)
}

/// Up to `n` discounted rewards followed by a discounted bootstrap from
/// `values`; the horizon shrinks near the end of the window.
pub fn n_step_return<T: Scalar>(rewards: &[T], discounts: &[T], values: &[T], n: usize) -> Result<Vec<T>> {
    if n < 1 {
        return Err(Error::invalid("n-step return needs n >= 1"));
    }
    let len = rewards.len();
    check_len("discounts", discounts.len(), len)?;
    check_len("values", values.len(), len + 1)?;
    let mut out = Vec::with_capacity(len);
    for t in 0..len {
        let end = (t + n).min(len);
        let mut g = values[end];
        for k in (t..end).rev() {
            g = rewards[k] + discounts[k] * g;
        }
        out.push(g);
    }
    Ok(out)
}

/// `G_t = r_{t+1} + γ_{t+1}((1 − λ) v_{t+1} + λ G_{t+1})`, `G_T = v_T`.
pub fn lambda_return<T: Scalar>(rewards: &[T], discounts: &[T], values: &[T], lambda: T) -> Result<Vec<T>> {
    if !(T::zero()..=T::one()).contains(&lambda) {
        return Err(Error::invalid(format!("lambda {lambda} outside [0, 1]")));
    }
    let len = rewards.len();
    check_len("discounts", discounts.len(), len)?;
    check_len("values", values.len(), len + 1)?;
    let mut out = vec![T::zero(); len];
    let mut g = values[len];
    for t in (0..len).rev() {
        g = rewards[t] + discounts[t] * ((T::one() - lambda) * values[t + 1] + lambda * g);
        out[t] = g;
    }
    Ok(out)
}

/// `G_t = r_{t+1} + γ_{t+1} max_a q(S_{t+1}, a)`.
pub fn q_learning_target<T: Scalar>(rewards: &[T], discounts: &[T], q_next: &[Vec<T>]) -> Result<Vec<T>> {
    check_len("discounts", discounts.len(), rewards.len())?;
    check_len("q_next", q_next.len(), rewards.len())?;
    rewards
        .iter()
        .zip(discounts)
        .zip(q_next)
        .map(|((&r, &d), q)| {
            let best = q
                .iter()
                .copied()
                .reduce(T::max)
                .ok_or_else(|| Error::invalid("empty action-value row"))?;
            Ok(r + d * best)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VTraceOutput<T> {
    /// Corrected value targets `vs_t`.
    pub vs: Vec<T>,
    /// `vs_t − v_t`.
    pub errors: Vec<T>,
    pub pg_advantage: Vec<T>,
}

/// Importance-weighted value targets and policy-gradient advantages.
/// `rhos[t] = π(A_t|S_t) / μ(A_t|S_t)`.
pub fn vtrace<T: Scalar>(
    values: &[T],
    rewards: &[T],
    discounts: &[T],
    rhos: &[T],
    lambda: T,
    clip_rho: T,
    clip_pg_rho: T,
) -> Result<VTraceOutput<T>> {
    let len = rewards.len();
    check_len("discounts", discounts.len(), len)?;
    check_len("values", values.len(), len + 1)?;
    check_len("rhos", rhos.len(), len)?;
    if let Some(bad) = rhos.iter().find(|&&r| !(r > T::zero())) {
        return Err(Error::invalid(format!("importance ratio {bad} is not positive")));
    }
    let mut errors = vec![T::zero(); len];
    let mut acc = T::zero();
    for t in (0..len).rev() {
        let delta = rhos[t].min(clip_rho) * (rewards[t] + discounts[t] * values[t + 1] - values[t]);
        acc = delta + discounts[t] * lambda * rhos[t].min(T::one()) * acc;
        errors[t] = acc;
    }
    let vs: Vec<T> = (0..len).map(|t| values[t] + errors[t]).collect();
    let pg_advantage = (0..len)
        .map(|t| {
            let next = if t + 1 < len { vs[t + 1] } else { values[len] };
            rhos[t].min(clip_pg_rho) * (rewards[t] + discounts[t] * next - values[t])
        })
        .collect();
    Ok(VTraceOutput {
        vs,
        errors,
        pg_advantage,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnKind {
    OneStepTd,
    NStep,
    LambdaReturn,
    /// Discounted rewards with no bootstrap.
    MonteCarlo,
    VTrace,
}

impl ReturnKind {
    pub fn name(self) -> &'static str {
        match self {
            ReturnKind::OneStepTd => "one_step_td",
            ReturnKind::NStep => "n_step",
            ReturnKind::LambdaReturn => "lambda_return",
            ReturnKind::MonteCarlo => "monte_carlo",
            ReturnKind::VTrace => "vtrace",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            ReturnKind::OneStepTd,
            ReturnKind::NStep,
            ReturnKind::LambdaReturn,
            ReturnKind::MonteCarlo,
            ReturnKind::VTrace,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

/// Which canonical return to regress towards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnSpec {
    pub kind: ReturnKind,
    pub n: usize,
    pub lambda: f64,
    pub clip_rho: f64,
    pub clip_pg_rho: f64,
}

impl Default for ReturnSpec {
    fn default() -> Self {
        ReturnSpec {
            kind: ReturnKind::LambdaReturn,
            n: 1,
            lambda: 1.0,
            clip_rho: 1.0,
            clip_pg_rho: 1.0,
        }
    }
}

impl ReturnSpec {
    pub fn monte_carlo() -> Self {
        ReturnSpec {
            kind: ReturnKind::MonteCarlo,
            ..Default::default()
        }
    }

    pub fn lambda(lambda: f64) -> Self {
        ReturnSpec {
            kind: ReturnKind::LambdaReturn,
            lambda,
            ..Default::default()
        }
    }

    pub fn vtrace(lambda: f64) -> Self {
        ReturnSpec {
            kind: ReturnKind::VTrace,
            lambda,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::invalid(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if self.kind == ReturnKind::NStep && self.n < 1 {
            return Err(Error::invalid("n-step return needs n >= 1"));
        }
        if !(self.clip_rho > 0.0 && self.clip_pg_rho > 0.0) {
            return Err(Error::invalid("clip thresholds must be positive"));
        }
        Ok(())
    }

    /// Value targets for the window. `rhos` is only read by VTrace and
    /// defaults to all ones.
    pub fn targets<T: Scalar>(&self, rewards: &[T], discounts: &[T], values: &[T], rhos: Option<&[T]>) -> Result<Vec<T>> {
        self.validate()?;
        match self.kind {
            ReturnKind::OneStepTd => n_step_return(rewards, discounts, values, 1),
            ReturnKind::NStep => n_step_return(rewards, discounts, values, self.n),
            ReturnKind::LambdaReturn => lambda_return(rewards, discounts, values, T::lit(self.lambda)),
            ReturnKind::MonteCarlo => discounted_returns(rewards, discounts, T::zero()),
            ReturnKind::VTrace => {
                let ones = vec![T::one(); rewards.len()];
                let out = vtrace(
                    values,
                    rewards,
                    discounts,
                    rhos.unwrap_or(&ones),
                    T::lit(self.lambda),
                    T::lit(self.clip_rho),
                    T::lit(self.clip_pg_rho),
                )?;
                Ok(out.vs)
            }
        }
    }
}
