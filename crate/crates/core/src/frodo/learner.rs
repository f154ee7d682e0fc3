use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{FrodoConfig, InnerMode};
use super::losses::{consistency_loss_against, consistency_targets, inner_loss, inner_loss_with, outer_loss_with, target_divergence, OuterConstants};
use crate::autodiff::{Tape, Var};
use crate::envs::Trajectory;
use crate::error::{Error, Result};
use crate::nn::{init_params_with, AgentNetwork, MetaNetwork, ParamSet, VarSet};
use crate::optim::{clip_global_norm, clip_global_norm_on_tape, OptimizerState, TapeOptState};
use crate::scalar::Scalar;

/// Which part of a meta-step a trajectory is requested for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// The `i`-th inner update, counting from 0.
    Inner(usize),
    Validation,
}

/// Supplies trajectories collected with the given agent parameters.
pub trait TrajectorySource<T> {
    fn next(&mut self, params: &ParamSet<T>, role: Role) -> Result<Trajectory>;
}

impl<T, F: FnMut(&ParamSet<T>, Role) -> Result<Trajectory>> TrajectorySource<T> for F {
    fn next(&mut self, params: &ParamSet<T>, role: Role) -> Result<Trajectory> {
        self(params, role)
    }
}

/// Replays a fixed list of `M + 1` trajectories, ignoring the parameters.
#[derive(Debug, Clone)]
pub struct FixedTrajectories {
    pub trajectories: Vec<Trajectory>,
}

impl<T> TrajectorySource<T> for FixedTrajectories {
    fn next(&mut self, _params: &ParamSet<T>, role: Role) -> Result<Trajectory> {
        let idx = match role {
            Role::Inner(i) => i,
            Role::Validation => self.trajectories.len().saturating_sub(1),
        };
        self.trajectories
            .get(idx)
            .cloned()
            .ok_or(Error::IndexOutOfRange {
                index: idx,
                bound: self.trajectories.len(),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaUpdateReport {
    pub outer_loss: f64,
    pub inner_losses: Vec<f64>,
    /// Unweighted sum over the inner trajectories.
    pub consistency_loss: f64,
    /// Norm before clipping.
    pub meta_grad_norm: f64,
    /// NaN when the meta-network output is not a target.
    pub target_divergence: f64,
    pub diverged: bool,
    /// Trajectories consumed, inner ones first.
    pub trajectories: Vec<Trajectory>,
}

impl MetaUpdateReport {
    pub fn inner_loss_mean(&self) -> f64 {
        self.inner_losses.iter().sum::<f64>() / self.inner_losses.len() as f64
    }
}

/// Values to hold fixed in place of every stop-gradient quantity of an
/// unroll. Re-running with these while perturbing `η` evaluates exactly the
/// function whose gradient the tape computes, which is what a
/// finite-difference check needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Frozen<T> {
    /// Optimizer accumulators after each inner update.
    pub accumulators: Option<Vec<ParamSet<T>>>,
    /// Consistency targets per inner trajectory.
    pub consistency: Vec<Vec<T>>,
    /// Actor-critic policy baselines per inner trajectory.
    pub baselines: Vec<Vec<T>>,
    pub outer: OuterConstants,
}

/// Everything recorded by one unroll of `M` inner updates plus the outer loss.
pub struct Unrolled<T: Scalar> {
    pub tape: Tape<T>,
    pub eta: VarSet,
    /// Outer loss plus weighted consistency.
    pub total: Var,
    pub outer: Var,
    pub inner_losses: Vec<f64>,
    pub consistency: f64,
    pub theta: VarSet,
    pub theta_opt: TapeOptState,
    /// Optimizer accumulator values after each inner update (RMSProp only).
    pub accumulators: Vec<ParamSet<T>>,
    pub consistency_targets: Vec<Vec<T>>,
    pub baselines: Vec<Vec<T>>,
    pub outer_constants: OuterConstants,
    pub trajectories: Vec<Trajectory>,
}

impl<T: Scalar> Unrolled<T> {
    /// The detached quantities of this unroll.
    pub fn frozen(&self) -> Frozen<T> {
        Frozen {
            accumulators: (!self.accumulators.is_empty()).then(|| self.accumulators.clone()),
            consistency: self.consistency_targets.clone(),
            baselines: self.baselines.clone(),
            outer: self.outer_constants.clone(),
        }
    }
}

/// An agent `θ` trained online by a learned target `g_η`.
#[derive(Debug, Clone)]
pub struct Frodo<T> {
    pub config: FrodoConfig,
    pub agent: AgentNetwork,
    pub meta: MetaNetwork,
    pub theta: ParamSet<T>,
    pub eta: ParamSet<T>,
    pub theta_opt: OptimizerState<T>,
    pub eta_opt: OptimizerState<T>,
}

impl<T: Scalar> Frodo<T> {
    /// Fresh agent and meta-network initialised from `seed`.
    pub fn new(config: FrodoConfig, agent: AgentNetwork, meta: MetaNetwork, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = init_params_with(&agent, &mut rng);
        let eta = init_params_with(&meta, &mut rng);
        Self::with_params(config, agent, meta, theta, eta)
    }

    pub fn with_params(
        config: FrodoConfig,
        agent: AgentNetwork,
        meta: MetaNetwork,
        theta: ParamSet<T>,
        eta: ParamSet<T>,
    ) -> Result<Self> {
        config.validate()?;
        for f in config.meta_features() {
            if !meta.features.contains(&f) && config.inner_mode != InnerMode::Fixed {
                return Err(Error::invalid(format!(
                    "meta-network lacks input `{}` required by this configuration",
                    f.name()
                )));
            }
        }
        let theta_opt = OptimizerState::new(config.inner_optimizer, &theta);
        let eta_opt = OptimizerState::new(config.meta_optimizer, &eta);
        Ok(Frodo {
            config,
            agent,
            meta,
            theta,
            eta,
            theta_opt,
            eta_opt,
        })
    }

    /// Records `M` inner updates and the outer loss on a fresh tape, with `η`
    /// as a differentiable leaf.
    pub fn unroll<S: TrajectorySource<T> + ?Sized>(&self, eta: &ParamSet<T>, source: &mut S) -> Result<Unrolled<T>> {
        self.unroll_with(eta, source, None)
    }

    /// [`unroll`](Self::unroll) with every stop-gradient quantity pinned to
    /// the values in `frozen`.
    pub fn unroll_with<S: TrajectorySource<T> + ?Sized>(
        &self,
        eta: &ParamSet<T>,
        source: &mut S,
        frozen: Option<&Frozen<T>>,
    ) -> Result<Unrolled<T>> {
        let c = &self.config;
        let frozen_acc = frozen.and_then(|f| f.accumulators.as_deref());
        if let Some(f) = frozen_acc {
            if f.len() != c.m {
                return Err(Error::LengthMismatch {
                    what: "frozen accumulators",
                    got: f.len(),
                    expected: c.m,
                });
            }
        }
        let tape = Tape::new();
        let eta_vars = eta.to_tape(&tape, true);
        let mut theta = self.theta.to_tape(&tape, true);
        let mut opt = self.theta_opt.to_tape(&tape);
        let mut inner_losses = Vec::with_capacity(c.m);
        let mut consistency = tape.scalar(T::zero());
        let mut trajectories = Vec::with_capacity(c.m + 1);
        let mut accumulators = Vec::new();
        let mut pinned_consistency = Vec::new();
        let mut baselines = Vec::new();
        for i in 0..c.m {
            let traj = source.next(&theta.values(&tape), Role::Inner(i))?;
            let pinned = frozen.and_then(|f| f.baselines.get(i)).map(Vec::as_slice);
            let inner = inner_loss_with(&tape, c, &self.agent, &self.meta, &theta, &eta_vars, &traj, pinned)?;
            if let Some(b) = inner.baseline {
                baselines.push(tape.value(b).data().to_vec());
            }
            inner_losses.push(tape.item(inner.loss).as_f64());
            if c.inner_mode == InnerMode::Target {
                let target = match frozen {
                    Some(f) => f.consistency.get(i).cloned().ok_or(Error::IndexOutOfRange {
                        index: i,
                        bound: f.consistency.len(),
                    })?,
                    None => {
                        let g = tape.value(inner.targets).data().to_vec();
                        let r: Vec<T> = traj.rewards().iter().map(|&x| T::lit(x)).collect();
                        let d: Vec<T> = traj.discounts().iter().map(|&x| T::lit(x)).collect();
                        consistency_targets(&g, &r, &d, c.consistency_n)?
                    }
                };
                let cl = consistency_loss_against(&tape, inner.targets, target.clone())?;
                consistency = tape.add(consistency, cl)?;
                pinned_consistency.push(target);
            }
            let grads = theta.grad_graph(&tape, inner.loss)?;
            let grads = clip_global_norm_on_tape(&tape, &grads, T::lit(c.inner_clip))?;
            (opt, theta) = opt.step_with(&tape, &theta, &grads, frozen_acc.map(|f| &f[i]))?;
            if let Some(acc) = &opt.accumulators {
                accumulators.push(acc.values(&tape));
            }
            trajectories.push(traj);
        }
        let val = source.next(&theta.values(&tape), Role::Validation)?;
        let outer = outer_loss_with(&tape, c, &self.agent, &theta, &val, frozen.map(|f| &f.outer))?;
        let total = if c.consistency_weight > 0.0 {
            tape.add(outer.loss, tape.scale(consistency, T::lit(c.consistency_weight))?)?
        } else {
            outer.loss
        };
        trajectories.push(val);
        Ok(Unrolled {
            consistency: tape.item(consistency).as_f64(),
            tape,
            eta: eta_vars,
            total,
            outer: outer.loss,
            outer_constants: outer.constants,
            inner_losses,
            theta,
            theta_opt: opt,
            accumulators,
            consistency_targets: pinned_consistency,
            baselines,
            trajectories,
        })
    }

    /// Value of the full objective (outer plus weighted consistency) at `η`.
    pub fn meta_objective<S: TrajectorySource<T> + ?Sized>(
        &self,
        eta: &ParamSet<T>,
        source: &mut S,
        frozen: Option<&Frozen<T>>,
    ) -> Result<T> {
        let u = self.unroll_with(eta, source, frozen)?;
        Ok(u.tape.item(u.total))
    }

    /// Unclipped meta-gradient at the current `η`.
    pub fn meta_gradient<S: TrajectorySource<T> + ?Sized>(&self, source: &mut S) -> Result<ParamSet<T>> {
        let u = self.unroll(&self.eta, source)?;
        u.eta.grad(&u.tape, u.total)
    }

    /// One meta-update: `M` inner updates of `θ` (kept), then an update of
    /// `η` along the clipped meta-gradient.
    pub fn meta_step<S: TrajectorySource<T> + ?Sized>(&mut self, source: &mut S) -> Result<MetaUpdateReport> {
        let u = self.unroll(&self.eta, source)?;
        let meta_grad = u.eta.grad(&u.tape, u.total)?;
        let norm = meta_grad.global_norm().as_f64();
        let new_theta = u.theta.values(&u.tape);
        let new_theta_opt = u.theta_opt.values(&u.tape);
        let theta_ok = new_theta.is_finite();
        let grad_ok = norm.is_finite();
        let outer_loss = u.tape.item(u.outer).as_f64();

        let divergence = match self.config.inner_mode {
            InnerMode::DirectLoss => f64::NAN,
            _ => {
                // targets the current η would assign to the validation data
                let val = u.trajectories.last().ok_or(Error::invalid("no validation trajectory"))?;
                let inner = inner_loss(&u.tape, &self.config, &self.agent, &self.meta, &u.theta, &u.eta, val)?;
                let g = u.tape.value(inner.targets).to_f64_vec();
                target_divergence(&g, &u.outer_constants.targets)?
            }
        };

        if theta_ok {
            self.theta = new_theta;
            self.theta_opt = new_theta_opt;
        }
        if grad_ok && theta_ok {
            let clipped = clip_global_norm(&meta_grad, T::lit(self.config.meta_clip));
            self.eta = self.eta_opt.apply(&self.eta, &clipped)?;
        }
        let diverged = !(grad_ok && theta_ok && outer_loss.is_finite() && self.eta.is_finite());
        Ok(MetaUpdateReport {
            outer_loss,
            inner_losses: u.inner_losses,
            consistency_loss: u.consistency,
            meta_grad_norm: norm,
            target_divergence: divergence,
            diverged,
            trajectories: u.trajectories,
        })
    }
}
