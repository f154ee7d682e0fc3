use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::envs::walk::{self, WalkState, NUM_STATES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdLambdaConfig {
    pub lambda: f64,
    pub lr: f64,
    /// Environment steps to run.
    pub steps: u64,
    /// Steps between flips of the left reward; `None` keeps it at 0.
    pub switch_period: Option<usize>,
    /// Steps between MSE measurements.
    pub log_every: u64,
    /// Apply the accumulated increments at episode end instead of every step.
    pub offline: bool,
}

impl Default for TdLambdaConfig {
    fn default() -> Self {
        TdLambdaConfig {
            lambda: 0.8,
            lr: 0.1,
            steps: 100_000,
            switch_period: Some(walk::DEFAULT_SWITCH_PERIOD),
            log_every: 160,
            offline: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsePoint {
    pub env_step: u64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdLambdaRun {
    pub values: [f64; NUM_STATES],
    pub curve: Vec<MsePoint>,
}

impl TdLambdaRun {
    /// Mean logged MSE over the last `fraction` of the run.
    pub fn final_window_mse(&self, fraction: f64) -> f64 {
        final_window_mean(&self.curve, fraction)
    }
}

/// Mean MSE over logged points whose step lies in the last `fraction` of the run.
pub fn final_window_mean(curve: &[MsePoint], fraction: f64) -> f64 {
    let Some(last) = curve.last() else {
        return f64::NAN;
    };
    let cutoff = last.env_step as f64 * (1.0 - fraction);
    let tail: Vec<f64> = curve
        .iter()
        .filter(|p| p.env_step as f64 > cutoff)
        .map(|p| p.mse)
        .collect();
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Mean squared error over the five states.
pub fn value_mse(values: &[f64], truth: &[f64]) -> f64 {
    values
        .iter()
        .zip(truth)
        .map(|(v, t)| (v - t) * (v - t))
        .sum::<f64>()
        / truth.len() as f64
}

/// Tabular TD(λ) with accumulating eligibility traces.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularTdLambda {
    pub values: Vec<f64>,
    trace: Vec<f64>,
    pending: Vec<f64>,
    lambda: f64,
    lr: f64,
    offline: bool,
}

impl TabularTdLambda {
    pub fn new(num_states: usize, lambda: f64, lr: f64, offline: bool) -> Self {
        TabularTdLambda {
            values: vec![0.0; num_states],
            trace: vec![0.0; num_states],
            pending: vec![0.0; num_states],
            lambda,
            lr,
            offline,
        }
    }

    /// One undiscounted transition from `state`; `next` is `None` on termination.
    pub fn observe(&mut self, state: usize, reward: f64, next: Option<usize>) {
        let bootstrap = next.map_or(0.0, |n| self.values[n]);
        let delta = reward + bootstrap - self.values[state];
        for e in self.trace.iter_mut() {
            *e *= self.lambda;
        }
        self.trace[state] += 1.0;
        for i in 0..self.values.len() {
            let inc = self.lr * delta * self.trace[i];
            if self.offline {
                self.pending[i] += inc;
            } else {
                self.values[i] += inc;
            }
        }
        if next.is_none() {
            self.trace.iter_mut().for_each(|e| *e = 0.0);
            if self.offline {
                for (v, p) in self.values.iter_mut().zip(self.pending.iter_mut()) {
                    *v += std::mem::take(p);
                }
            }
        }
    }
}

/// TD(λ) on the random walk, logging MSE against the phase-correct true values.
pub fn td_lambda_learner(config: &TdLambdaConfig, seed: u64) -> Result<TdLambdaRun> {
    if !(0.0..=1.0).contains(&config.lambda) {
        return Err(Error::invalid(format!("lambda {} outside [0, 1]", config.lambda)));
    }
    if config.log_every == 0 {
        return Err(Error::invalid("log_every must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut learner = TabularTdLambda::new(NUM_STATES, config.lambda, config.lr, config.offline);
    let mut state = WalkState::start();
    let mut curve = Vec::new();
    for step in 1..=config.steps {
        let (next, reward, done) = walk::walk_step(state, &mut rng, config.switch_period);
        learner.observe(state.position - 1, reward, (!done).then(|| next.position - 1));
        state = next;
        if step % config.log_every == 0 {
            curve.push(MsePoint {
                env_step: step,
                mse: value_mse(&learner.values, &walk::walk_true_values(state.left_reward())),
            });
        }
    }
    let mut values = [0.0; NUM_STATES];
    values.copy_from_slice(&learner.values);
    Ok(TdLambdaRun { values, curve })
}
