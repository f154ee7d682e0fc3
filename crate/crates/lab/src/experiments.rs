//! One seed of each study.

use frodo_core::autodiff::Tensor;
use frodo_core::envs::walk::NUM_STATES;
use frodo_core::envs::{
    catch_reset, catch_step, lookahead_action, Catch, EnvStream, RandomWalk, Trajectory, UniformPolicy,
};
use frodo_core::frodo::{Frodo, FrodoConfig, Role};
use frodo_core::nn::{AgentNetwork, Head, MetaNetwork, ParamSet};
use frodo_core::rl::{td_lambda_learner, value_mse, TdLambdaConfig};
use frodo_core::envs::LaggedActor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::error::LabResult;
use crate::metrics::{MetricsLogger, MetricsRow};

const CATCH_OBS: usize = frodo_core::envs::catch::ROWS * frodo_core::envs::catch::COLS;
const CATCH_ACTIONS: usize = frodo_core::envs::catch::NUM_ACTIONS;
const MAX_EPISODE_STEPS: usize = 64;

/// Rows logged by one seed and whether any of its meta-updates diverged.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    pub diverged: bool,
}

/// Horizon of the lookahead baseline; matches the inner trajectory length.
pub const LOOKAHEAD_HORIZON: usize = 3;

fn catch_learner(config: &ExperimentConfig, frodo: FrodoConfig, seed: u64) -> LabResult<Frodo<f64>> {
    let agent = AgentNetwork::new(
        CATCH_OBS,
        config.agent_hidden.clone(),
        Head::ActorCritic {
            num_actions: CATCH_ACTIONS,
        },
    );
    let meta = MetaNetwork::new(frodo.meta_features(), config.meta_hidden);
    Ok(Frodo::new(frodo, agent, meta, seed)?)
}

/// Actor-critic FRODO on Catch. Inner trajectories are consecutive windows of
/// one persistent stream; the validation trajectory is a complete episode
/// from a second environment, so the outer return needs no bootstrap.
/// With `config.lag > 0` the actor's parameters trail the learner's.
pub fn catch_frodo(config: &ExperimentConfig, frodo: FrodoConfig, seed: u64) -> LabResult<SeedRun> {
    let mut learner = catch_learner(config, frodo, seed)?;
    let agent = learner.agent.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5EED));
    let mut stream = EnvStream::new(Catch::new(), config.discount, &mut rng);
    let mut validation = EnvStream::new(Catch::new(), config.discount, &mut rng);
    let mut actor = LaggedActor::new(config.lag);
    let mut log = MetricsLogger::new(seed, config.log_every, config.return_window);
    let len = config.trajectory_len;
    let mut steps = 0u64;

    let mut source = |theta: &ParamSet<f64>, role: Role| -> frodo_core::Result<Trajectory> {
        if role != Role::Inner(0) {
            actor.observe_update();
        }
        let params = actor.params(theta).clone();
        let mut policy = |obs: &[f64]| agent.action_probs(&params, obs, 0.0);
        match role {
            Role::Inner(_) => stream.collect(&mut policy, len, &mut rng),
            Role::Validation => validation.run_episode(&mut policy, MAX_EPISODE_STEPS, &mut rng),
        }
    };
    while steps < config.total_env_steps {
        let report = learner.meta_step(&mut source)?;
        for t in &report.trajectories {
            steps += t.len() as u64;
            for &r in &t.completed_returns {
                log.episode_finished(r);
            }
        }
        log.meta_update(&report);
        log.advance(steps);
    }
    let diverged = log.any_diverged();
    Ok(SeedRun {
        seed,
        rows: log.finish(),
        diverged,
    })
}

fn walk_states() -> Tensor<f64> {
    let mut eye = vec![0.0; NUM_STATES * NUM_STATES];
    for i in 0..NUM_STATES {
        eye[i * NUM_STATES + i] = 1.0;
    }
    Tensor::from_f64(&[NUM_STATES, NUM_STATES], &eye).expect("square identity")
}

/// Steps between value-error samples on the walk: one meta-update.
pub fn walk_sample_every(config: &ExperimentConfig) -> u64 {
    (config.trajectory_len * (config.frodo.m + 1)) as u64
}

/// Prediction FRODO on the switching random walk. Every trajectory, inner or
/// validation, is the next window of a single stream.
pub fn walk_frodo(config: &ExperimentConfig, seed: u64) -> LabResult<SeedRun> {
    let agent = AgentNetwork::new(NUM_STATES, config.agent_hidden.clone(), Head::Value);
    let meta = MetaNetwork::new(config.frodo.meta_features(), config.meta_hidden);
    let mut learner = Frodo::<f64>::new(config.frodo.clone(), agent.clone(), meta, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5EED));
    let mut stream = EnvStream::new(RandomWalk::new(Some(config.switch_period)), config.discount, &mut rng);
    let mut log = MetricsLogger::new(seed, config.log_every, config.return_window);
    let states = walk_states();
    let len = config.trajectory_len;
    let mut steps = 0u64;
    while steps < config.total_env_steps {
        let report = learner.meta_step(&mut |_: &ParamSet<f64>, _: Role| {
            stream.collect(&mut UniformPolicy { num_actions: 1 }, len, &mut rng)
        })?;
        steps += report.trajectories.iter().map(|t| t.len() as u64).sum::<u64>();
        let values = agent.evaluate_values(&learner.theta, &states)?;
        log.value_error(value_mse(&values, &stream.env().true_values()));
        log.meta_update(&report);
        log.advance(steps);
    }
    let diverged = log.any_diverged();
    Ok(SeedRun {
        seed,
        rows: log.finish(),
        diverged,
    })
}

/// Tabular TD(λ) on the same walk, sampled at the FRODO cadence.
pub fn walk_td_lambda(config: &ExperimentConfig, lambda: f64, seed: u64) -> LabResult<SeedRun> {
    let td = TdLambdaConfig {
        lambda,
        lr: config.td_lr,
        steps: config.total_env_steps,
        switch_period: Some(config.switch_period),
        log_every: walk_sample_every(config),
        offline: false,
    };
    let run = td_lambda_learner(&td, seed)?;
    let mut log = MetricsLogger::new(seed, config.log_every, config.return_window);
    for p in &run.curve {
        log.value_error(p.mse);
        log.advance(p.env_step);
    }
    log.advance(config.total_env_steps);
    Ok(SeedRun {
        seed,
        rows: log.finish(),
        diverged: false,
    })
}

/// The exhaustive three-move lookahead player on Catch.
pub fn catch_lookahead(config: &ExperimentConfig, seed: u64) -> LabResult<SeedRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5EED));
    let mut log = MetricsLogger::new(seed, config.log_every, config.return_window);
    let mut steps = 0u64;
    while steps < config.total_env_steps {
        let mut s = catch_reset(&mut rng);
        loop {
            let a = lookahead_action(&s, LOOKAHEAD_HORIZON, &mut rng)?;
            let (next, reward, done) = catch_step(s, a)?;
            steps += 1;
            s = next;
            if done {
                log.episode_finished(reward);
                break;
            }
        }
        log.advance(steps);
    }
    Ok(SeedRun {
        seed,
        rows: log.finish(),
        diverged: false,
    })
}
