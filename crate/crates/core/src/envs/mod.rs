//! Toy environments and trajectory collection.

pub mod catch;
pub mod lag;
pub mod lookahead;
pub mod trajectory;
pub mod walk;

#[cfg(test)]
mod tests;

use rand::Rng;

use crate::error::{Error, Result};

pub use catch::{catch_observation, catch_reset, catch_step, Catch, CatchAction, CatchState};
pub use lag::LaggedActor;
pub use lookahead::{lookahead_action, lookahead_baseline, three_step_lookahead_baseline};
pub use trajectory::{StepType, Trajectory, Transition};
pub use walk::{walk_step, walk_true_values, RandomWalk, WalkState};

pub trait Environment {
    fn obs_dim(&self) -> usize;
    fn num_actions(&self) -> usize;
    /// Starts a new episode and returns its first observation.
    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<f64>;
    /// Returns `(observation, reward, done)`.
    fn step<R: Rng + ?Sized>(&mut self, action: usize, rng: &mut R) -> Result<(Vec<f64>, f64, bool)>;
}

/// Anything that can give action probabilities for an observation.
pub trait Policy {
    fn action_probs(&mut self, obs: &[f64]) -> Result<Vec<f64>>;
}

impl<F: FnMut(&[f64]) -> Result<Vec<f64>>> Policy for F {
    fn action_probs(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        self(obs)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct UniformPolicy {
    pub num_actions: usize,
}

impl Policy for UniformPolicy {
    fn action_probs(&mut self, _obs: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![1.0 / self.num_actions as f64; self.num_actions])
    }
}

/// Draws an index from a categorical distribution.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<usize> {
    let total: f64 = probs.iter().sum();
    if probs.is_empty() || !total.is_finite() || total <= 0.0 || probs.iter().any(|&p| p < 0.0) {
        return Err(Error::invalid(format!("invalid action probabilities {probs:?}")));
    }
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(i);
        }
    }
    Ok(probs.iter().rposition(|&p| p > 0.0).unwrap_or(0))
}

/// An environment that keeps running across trajectory windows, resetting
/// itself whenever an episode ends.
#[derive(Debug, Clone)]
pub struct EnvStream<E> {
    env: E,
    discount: f64,
    obs: Vec<f64>,
    at_episode_start: bool,
    episode_return: f64,
    steps: u64,
}

impl<E: Environment> EnvStream<E> {
    pub fn new<R: Rng + ?Sized>(mut env: E, discount: f64, rng: &mut R) -> Self {
        let obs = env.reset(rng);
        EnvStream {
            env,
            discount,
            obs,
            at_episode_start: true,
            episode_return: 0.0,
            steps: 0,
        }
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    pub fn observation(&self) -> &[f64] {
        &self.obs
    }

    /// Environment steps taken so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    fn step_once<P: Policy + ?Sized, R: Rng + ?Sized>(
        &mut self,
        policy: &mut P,
        rng: &mut R,
    ) -> Result<(Transition, Option<f64>)> {
        let probs = policy.action_probs(&self.obs)?;
        if probs.len() != self.env.num_actions() {
            return Err(Error::LengthMismatch {
                what: "action probabilities",
                got: probs.len(),
                expected: self.env.num_actions(),
            });
        }
        let action = sample_categorical(&probs, rng)?;
        let (next, reward, done) = self.env.step(action, rng)?;
        self.steps += 1;
        self.episode_return += reward;
        let step_type = if done {
            StepType::Last
        } else if self.at_episode_start {
            StepType::First
        } else {
            StepType::Mid
        };
        let transition = Transition {
            observation: std::mem::replace(&mut self.obs, next),
            action,
            reward,
            discount: if done { 0.0 } else { self.discount },
            behavior_prob: probs[action],
            step_type,
        };
        let finished = if done {
            let ret = std::mem::take(&mut self.episode_return);
            self.obs = self.env.reset(rng);
            self.at_episode_start = true;
            Some(ret)
        } else {
            self.at_episode_start = false;
            None
        };
        Ok((transition, finished))
    }

    /// The next `len` transitions, continuing wherever the stream left off.
    pub fn collect<P: Policy + ?Sized, R: Rng + ?Sized>(
        &mut self,
        policy: &mut P,
        len: usize,
        rng: &mut R,
    ) -> Result<Trajectory> {
        let mut transitions = Vec::with_capacity(len);
        let mut completed_returns = Vec::new();
        for _ in 0..len {
            let (t, done) = self.step_once(policy, rng)?;
            transitions.push(t);
            completed_returns.extend(done);
        }
        Ok(Trajectory {
            transitions,
            final_observation: self.obs.clone(),
            completed_returns,
        })
    }

    /// Abandons any episode in progress and plays one full episode.
    pub fn run_episode<P: Policy + ?Sized, R: Rng + ?Sized>(
        &mut self,
        policy: &mut P,
        max_steps: usize,
        rng: &mut R,
    ) -> Result<Trajectory> {
        self.obs = self.env.reset(rng);
        self.at_episode_start = true;
        self.episode_return = 0.0;
        let mut transitions = Vec::new();
        for _ in 0..max_steps {
            let (t, done) = self.step_once(policy, rng)?;
            transitions.push(t);
            if let Some(ret) = done {
                return Ok(Trajectory {
                    transitions,
                    final_observation: self.obs.clone(),
                    completed_returns: vec![ret],
                });
            }
        }
        Err(Error::invalid(format!("episode did not end within {max_steps} steps")))
    }
}

/// One-shot form of [`EnvStream::collect`] starting from a fresh reset.
pub fn collect<E: Environment, P: Policy + ?Sized, R: Rng + ?Sized>(
    env: E,
    policy: &mut P,
    len: usize,
    discount: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    EnvStream::new(env, discount, rng).collect(policy, len, rng)
}
