use super::config::{FrodoConfig, InnerMode, Variant};
use crate::autodiff::{Tape, Tensor, Var};
use crate::envs::Trajectory;
use crate::error::{Error, Result};
use crate::nn::{AgentNetwork, MetaFeature, MetaInputs, MetaNetwork, VarSet};
use crate::rl::{self, ReturnKind};
use crate::scalar::Scalar;

fn lits<T: Scalar>(xs: &[f64]) -> Vec<T> {
    xs.iter().map(|&x| T::lit(x)).collect()
}

fn constant<T: Scalar>(tape: &Tape<T>, xs: &[f64]) -> Var {
    tape.constant(Tensor::vector(lits(xs)))
}

/// Agent quantities over a trajectory of `T` transitions.
struct Unroll {
    len: usize,
    /// `v(S_t)`, `[T]`; for value control `q(S_t, A_t)`.
    current: Var,
    /// `v(S_{t+1})`, `[T]`; for value control `max_a q(S_{t+1}, a)`.
    next: Var,
    /// Bootstrap values `[T + 1]` for classic returns, detached.
    bootstrap: Vec<f64>,
    /// `log π(·|S_t)`, `[T, A]`.
    log_pi: Option<Var>,
    /// `log π(A_t|S_t)`, `[T]`.
    log_pi_a: Option<Var>,
}

fn row_argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold(0, |best, (i, &x)| if x > row[best] { i } else { best })
}

fn unroll<T: Scalar>(tape: &Tape<T>, agent: &AgentNetwork, theta: &VarSet, traj: &Trajectory, variant: Variant) -> Result<Unroll> {
    let len = traj.len();
    if len == 0 {
        return Err(Error::invalid("empty trajectory"));
    }
    let obs = tape.constant(traj.observation_tensor::<T>()?);
    let out = agent.forward(tape, theta, obs)?;
    let actions = traj.actions();
    match variant {
        Variant::Prediction | Variant::ActorCritic => {
            let v = out.values()?;
            let (log_pi, log_pi_a) = if variant == Variant::ActorCritic {
                let logits = tape.slice(out.logits()?, 0, 0, len)?;
                let lp = tape.log_softmax(logits, 1)?;
                (Some(lp), Some(tape.index_select(lp, &actions)?))
            } else {
                (None, None)
            };
            Ok(Unroll {
                len,
                current: tape.slice(v, 0, 0, len)?,
                next: tape.slice(v, 0, 1, len)?,
                bootstrap: tape.value(v).to_f64_vec(),
                log_pi,
                log_pi_a,
            })
        }
        Variant::ValueControl => {
            let q = out.q()?;
            let values = tape.value(q);
            let a = agent.num_actions();
            let rows: Vec<&[T]> = values.data().chunks(a).collect();
            let greedy: Vec<usize> = rows
                .iter()
                .map(|r| row_argmax(&r.iter().map(|x| x.as_f64()).collect::<Vec<_>>()))
                .collect();
            let bootstrap = rows
                .iter()
                .zip(&greedy)
                .map(|(r, &g)| r[g].as_f64())
                .collect();
            let current = tape.index_select(tape.slice(q, 0, 0, len)?, &actions)?;
            let next = tape.index_select(tape.slice(q, 0, 1, len)?, &greedy[1..])?;
            Ok(Unroll {
                len,
                current,
                next,
                bootstrap,
                log_pi: None,
                log_pi_a: None,
            })
        }
    }
}

/// `Σ_t H(π(·|S_t))` from log-probabilities `[T, A]`.
fn entropy<T: Scalar>(tape: &Tape<T>, log_pi: Var) -> Result<Var> {
    let p = tape.exp(log_pi)?;
    let plogp = tape.sum(tape.mul(p, log_pi)?)?;
    tape.neg(plogp)
}

fn mean_square<T: Scalar>(tape: &Tape<T>, diff: Var) -> Result<Var> {
    tape.mean(tape.square(diff)?)
}

fn half_sum_square<T: Scalar>(tape: &Tape<T>, diff: Var) -> Result<Var> {
    tape.scale(tape.sum(tape.square(diff)?)?, T::lit(0.5))
}

/// Inner loss and the per-step targets it used.
#[derive(Debug, Clone, Copy)]
pub struct InnerLoss {
    pub loss: Var,
    /// `[T]` meta-network outputs (or fixed targets).
    pub targets: Var,
    /// Detached value baseline of the actor-critic policy term.
    pub baseline: Option<Var>,
}

/// The η-parameterised loss for one trajectory.
pub fn inner_loss<T: Scalar>(
    tape: &Tape<T>,
    config: &FrodoConfig,
    agent: &AgentNetwork,
    meta: &MetaNetwork,
    theta: &VarSet,
    eta: &VarSet,
    traj: &Trajectory,
) -> Result<InnerLoss> {
    inner_loss_with(tape, config, agent, meta, theta, eta, traj, None)
}

/// [`inner_loss`] with the detached baseline optionally supplied.
#[allow(clippy::too_many_arguments)]
pub fn inner_loss_with<T: Scalar>(
    tape: &Tape<T>,
    config: &FrodoConfig,
    agent: &AgentNetwork,
    meta: &MetaNetwork,
    theta: &VarSet,
    eta: &VarSet,
    traj: &Trajectory,
    frozen_baseline: Option<&[T]>,
) -> Result<InnerLoss> {
    let u = unroll(tape, agent, theta, traj, config.variant)?;
    let rewards = traj.rewards();
    let discounts = traj.discounts();
    let targets = match config.inner_mode {
        InnerMode::Fixed => {
            let t = config.fixed_target.targets(&rewards, &discounts, &u.bootstrap, None)?;
            constant(tape, &t)
        }
        InnerMode::Target | InnerMode::DirectLoss => {
            let mut inputs = MetaInputs::new()
                .with(MetaFeature::Reward, constant(tape, &rewards))
                .with(MetaFeature::Discount, constant(tape, &discounts))
                .with(MetaFeature::NextValue, u.next)
                .with(MetaFeature::Value, u.current)
                .with(MetaFeature::MuProb, constant(tape, &traj.behavior_probs()));
            if let Some(lp) = u.log_pi_a {
                inputs.set(MetaFeature::PiProb, tape.exp(lp)?);
            }
            meta.forward(tape, eta, &inputs)?
        }
    };
    let mut baseline = None;
    let loss = if config.inner_mode == InnerMode::DirectLoss {
        let mut l = tape.sum(targets)?;
        if let Some(lp) = u.log_pi {
            l = tape.sub(l, tape.scale(entropy(tape, lp)?, T::lit(config.c2))?)?;
        }
        l
    } else {
        match config.variant {
            Variant::Prediction | Variant::ValueControl => mean_square(tape, tape.sub(targets, u.current)?)?,
            Variant::ActorCritic => {
                let lp = u.log_pi.ok_or_else(|| Error::invalid("actor-critic needs a policy head"))?;
                let lpa = u.log_pi_a.ok_or_else(|| Error::invalid("actor-critic needs a policy head"))?;
                let b = match frozen_baseline {
                    Some(b) => tape.constant(Tensor::vector(b.to_vec())),
                    None => tape.stop_gradient(u.current)?,
                };
                baseline = Some(b);
                let adv = tape.sub(targets, b)?;
                let pi_loss = tape.neg(tape.sum(tape.mul(adv, lpa)?)?)?;
                let baseline = half_sum_square(tape, tape.sub(targets, u.current)?)?;
                let ent = entropy(tape, lp)?;
                let l = tape.add(pi_loss, tape.scale(baseline, T::lit(config.c1))?)?;
                tape.sub(l, tape.scale(ent, T::lit(config.c2))?)?
            }
        }
    };
    debug_assert_eq!(tape.shape(targets), vec![u.len]);
    Ok(InnerLoss { loss, targets, baseline })
}

/// Rolled-up consistency targets for `g[..T−1]`: up to `n` discounted rewards
/// followed by a bootstrap from a later `g`. Zero loss exactly when
/// `g_t = r_{t+1} + γ_{t+1} g_{t+1}` holds along the window.
pub fn consistency_targets<T: Scalar>(g: &[T], rewards: &[T], discounts: &[T], n: usize) -> Result<Vec<T>> {
    if g.len() != rewards.len() {
        return Err(Error::LengthMismatch {
            what: "targets",
            got: g.len(),
            expected: rewards.len(),
        });
    }
    if g.len() < 2 {
        return Ok(Vec::new());
    }
    let k = g.len() - 1;
    rl::n_step_return(&rewards[..k], &discounts[..k], g, n)
}

/// `½ Σ_t (⊥target_t − g_t)²` over the first `T − 1` steps.
pub fn consistency_loss<T: Scalar>(tape: &Tape<T>, g: Var, rewards: &[f64], discounts: &[f64], n: usize) -> Result<Var> {
    let values = tape.value(g).data().to_vec();
    let target = consistency_targets(&values, &lits(rewards), &lits(discounts), n)?;
    consistency_loss_against(tape, g, target)
}

/// [`consistency_loss`] with the rolled-up targets supplied.
pub fn consistency_loss_against<T: Scalar>(tape: &Tape<T>, g: Var, target: Vec<T>) -> Result<Var> {
    if target.is_empty() {
        return Ok(tape.scalar(T::zero()));
    }
    let head = tape.slice(g, 0, 0, target.len())?;
    let t = tape.constant(Tensor::vector(target));
    half_sum_square(tape, tape.sub(t, head)?)
}

/// Detached quantities of the outer loss: value targets and, for
/// actor-critic, policy-gradient advantages.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterConstants {
    pub targets: Vec<f64>,
    pub advantages: Vec<f64>,
}

/// Canonical loss on the validation trajectory and the constants it used.
#[derive(Debug, Clone)]
pub struct OuterLoss {
    pub loss: Var,
    pub constants: OuterConstants,
}

/// Loss of the updated agent against a classic return (targets detached).
pub fn outer_loss<T: Scalar>(
    tape: &Tape<T>,
    config: &FrodoConfig,
    agent: &AgentNetwork,
    theta: &VarSet,
    traj: &Trajectory,
) -> Result<OuterLoss> {
    outer_loss_with(tape, config, agent, theta, traj, None)
}

/// [`outer_loss`] with the detached constants optionally supplied.
pub fn outer_loss_with<T: Scalar>(
    tape: &Tape<T>,
    config: &FrodoConfig,
    agent: &AgentNetwork,
    theta: &VarSet,
    traj: &Trajectory,
    frozen: Option<&OuterConstants>,
) -> Result<OuterLoss> {
    let u = unroll(tape, agent, theta, traj, config.variant)?;
    let constants = match frozen {
        Some(c) => c.clone(),
        None => outer_constants(tape, config, &u, traj)?,
    };
    let targets = &constants.targets;
    let loss = match config.variant {
        Variant::Prediction | Variant::ValueControl => {
            let diff = tape.sub(constant(tape, targets), u.current)?;
            tape.scale(mean_square(tape, diff)?, T::lit(0.5))?
        }
        Variant::ActorCritic => {
            let lp = u.log_pi.ok_or_else(|| Error::invalid("actor-critic needs a policy head"))?;
            let lpa = u.log_pi_a.ok_or_else(|| Error::invalid("actor-critic needs a policy head"))?;
            let pi_loss = tape.neg(tape.sum(tape.mul(constant(tape, &constants.advantages), lpa)?)?)?;
            let baseline = half_sum_square(tape, tape.sub(constant(tape, targets), u.current)?)?;
            let l = tape.add(pi_loss, tape.scale(baseline, T::lit(config.c1))?)?;
            tape.sub(l, tape.scale(entropy(tape, lp)?, T::lit(config.c2))?)?
        }
    };
    Ok(OuterLoss { loss, constants })
}

fn outer_constants<T: Scalar>(tape: &Tape<T>, config: &FrodoConfig, u: &Unroll, traj: &Trajectory) -> Result<OuterConstants> {
    let rewards = traj.rewards();
    let discounts = traj.discounts();
    let spec = config.outer_return;
    match config.variant {
        Variant::Prediction | Variant::ValueControl => Ok(OuterConstants {
            targets: spec.targets(&rewards, &discounts, &u.bootstrap, None)?,
            advantages: Vec::new(),
        }),
        Variant::ActorCritic => {
            let lpa = u.log_pi_a.ok_or_else(|| Error::invalid("actor-critic needs a policy head"))?;
            let (targets, advantages) = if spec.kind == ReturnKind::VTrace {
                let pi_a = tape.value(lpa).to_f64_vec();
                let rhos: Vec<f64> = pi_a
                    .iter()
                    .zip(traj.behavior_probs())
                    .map(|(lp, mu)| lp.exp() / mu)
                    .collect();
                let out = rl::vtrace(
                    &u.bootstrap,
                    &rewards,
                    &discounts,
                    &rhos,
                    spec.lambda,
                    spec.clip_rho,
                    spec.clip_pg_rho,
                )?;
                (out.vs, out.pg_advantage)
            } else {
                let g = spec.targets(&rewards, &discounts, &u.bootstrap, None)?;
                let adv = g.iter().zip(&u.bootstrap).map(|(g, v)| g - v).collect();
                (g, adv)
            };
            Ok(OuterConstants { targets, advantages })
        }
    }
}

/// Mean squared difference between learned and reference targets.
pub fn target_divergence(g: &[f64], reference: &[f64]) -> Result<f64> {
    if g.len() != reference.len() {
        return Err(Error::LengthMismatch {
            what: "reference",
            got: reference.len(),
            expected: g.len(),
        });
    }
    if g.is_empty() {
        return Ok(0.0);
    }
    Ok(g.iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / g.len() as f64)
}
