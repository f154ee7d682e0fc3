#![allow(clippy::needless_range_loop)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::Tensor;
use crate::nn::ParamSet;

#[test]
fn stream_marks_episode_boundaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut stream = EnvStream::new(Catch::new(), 1.0, &mut rng);
    let mut policy = UniformPolicy { num_actions: 3 };
    let traj = stream.collect(&mut policy, 12, &mut rng).unwrap();
    assert_eq!(traj.len(), 12);
    // Catch episodes are exactly five steps long
    for (i, t) in traj.transitions.iter().enumerate() {
        let expected = match i % 5 {
            0 => StepType::First,
            4 => StepType::Last,
            _ => StepType::Mid,
        };
        assert_eq!(t.step_type, expected, "step {i}");
        assert_eq!(t.discount, if i % 5 == 4 { 0.0 } else { 1.0 });
        assert!((t.behavior_prob - 1.0 / 3.0).abs() < 1e-15);
        if i % 5 != 4 {
            assert_eq!(t.reward, 0.0);
        } else {
            assert!(t.reward == 1.0 || t.reward == -1.0);
        }
    }
    assert_eq!(traj.completed_returns.len(), 2);
    assert_eq!(traj.completed_returns[0], traj.transitions[4].reward);
    // the window ends mid-episode and the next one picks up from there
    let more = stream.collect(&mut policy, 3, &mut rng).unwrap();
    assert_eq!(more.transitions[0].observation, traj.final_observation);
    assert_eq!(more.transitions[2].step_type, StepType::Last);
    assert_eq!(stream.steps(), 15);

    let obs = traj.observation_tensor::<f64>().unwrap();
    assert_eq!(obs.shape(), &[13, 66]);
}

#[test]
fn run_episode_is_one_full_episode() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut stream = EnvStream::new(Catch::new(), 1.0, &mut rng);
    let mut policy = UniformPolicy { num_actions: 3 };
    stream.collect(&mut policy, 2, &mut rng).unwrap();
    let ep = stream.run_episode(&mut policy, 100, &mut rng).unwrap();
    assert_eq!(ep.len(), 5);
    assert_eq!(ep.transitions[0].step_type, StepType::First);
    assert_eq!(ep.completed_returns, vec![ep.transitions[4].reward]);
}

#[test]
fn bad_policies_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut wrong_len = |_: &[f64]| Ok(vec![0.5, 0.5]);
    assert!(collect(Catch::new(), &mut wrong_len, 3, 1.0, &mut rng).is_err());
    let mut negative = |_: &[f64]| Ok(vec![1.5, -0.5, 0.0]);
    assert!(collect(Catch::new(), &mut negative, 3, 1.0, &mut rng).is_err());
}

#[test]
fn sampling_follows_probabilities() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let probs = [0.2, 0.0, 0.5, 0.3];
    let n = 20_000;
    let mut counts = [0usize; 4];
    for _ in 0..n {
        counts[sample_categorical(&probs, &mut rng).unwrap()] += 1;
    }
    assert_eq!(counts[1], 0);
    for (c, p) in counts.iter().zip(probs) {
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((*c as f64 - n as f64 * p).abs() <= 4.0 * sigma + 1e-9);
    }
}

/// Solves the Bellman equations of the walk by Gaussian elimination.
fn walk_values_by_elimination(left: f64) -> Vec<f64> {
    let n = 5;
    let mut a = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        a[i][i] = 1.0;
        if i > 0 {
            a[i][i - 1] = -0.5;
        } else {
            a[i][n] += 0.5 * left;
        }
        if i + 1 < n {
            a[i][i + 1] = -0.5;
        } else {
            a[i][n] += 0.5;
        }
    }
    for col in 0..n {
        let pivot = a[col][col];
        for j in col..=n {
            a[col][j] /= pivot;
        }
        for row in 0..n {
            if row != col {
                let f = a[row][col];
                for j in col..=n {
                    a[row][j] -= f * a[col][j];
                }
            }
        }
    }
    a.iter().map(|r| r[n]).collect()
}

#[test]
fn walk_values_match_linear_solve_and_monte_carlo() {
    for left in [0.0, -1.0] {
        let exact = walk_values_by_elimination(left);
        for (a, b) in walk_true_values(left).iter().zip(&exact) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    // Monte Carlo from the start state, stationary left reward 0
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 20_000;
    let mut total = 0.0;
    for _ in 0..n {
        let mut s = WalkState::start();
        loop {
            let (next, r, done) = walk_step(s, &mut rng, None);
            s = next;
            if done {
                total += r;
                break;
            }
        }
    }
    let mean = total / n as f64;
    // return is Bernoulli(0.5)
    assert!((mean - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt(), "{mean}");
}

#[test]
fn walk_stream_switches_left_reward() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut stream = EnvStream::new(RandomWalk::new(Some(960)), 1.0, &mut rng);
    let mut policy = UniformPolicy { num_actions: 1 };
    let first = stream.collect(&mut policy, 960, &mut rng).unwrap();
    assert!(first.rewards().iter().all(|&r| r >= 0.0));
    assert_eq!(stream.env().true_values(), walk_true_values(-1.0));
    let second = stream.collect(&mut policy, 960, &mut rng).unwrap();
    assert!(second.rewards().iter().all(|&r| r <= 0.0 || r == 1.0));
    assert!(second.rewards().contains(&-1.0));
    assert_eq!(stream.env().true_values(), walk_true_values(0.0));
}

#[test]
fn lagged_actor_refreshes_every_k_updates() {
    let p = |x: f64| -> ParamSet<f64> { [("w".to_string(), Tensor::scalar(x))].into_iter().collect() };
    let mut actor = LaggedActor::new(3);
    let mut learner = p(0.0);
    let mut seen = Vec::new();
    for step in 1..=7 {
        seen.push(actor.params(&learner).get("w").unwrap().item());
        learner = p(step as f64);
        actor.observe_update();
    }
    assert_eq!(seen, vec![0.0, 0.0, 0.0, 3.0, 3.0, 3.0, 6.0]);

    let mut live = LaggedActor::new(0);
    assert_eq!(live.params(&learner), &learner);
}

/// Probability that the three-step lookahead catches the pellet: the first
/// two moves see nothing and are uniform, after which the player catches
/// iff the pellet is at most three columns away.
fn three_step_catch_probability() -> f64 {
    let mut p = 0.0;
    for col in 0..11i64 {
        for a in [-1i64, 0, 1] {
            for b in [-1i64, 0, 1] {
                let paddle = (5 + a).clamp(0, 10);
                let paddle = (paddle + b).clamp(0, 10);
                if (paddle - col).abs() <= 3 {
                    p += 1.0 / 11.0 / 9.0;
                }
            }
        }
    }
    p
}

#[test]
fn three_step_lookahead_value() {
    let p = three_step_catch_probability();
    assert!((p - 7.0 / 11.0).abs() < 1e-12);
    let exact = 2.0 * p - 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 20_000;
    let mean = three_step_lookahead_baseline(&mut rng, n).unwrap();
    let sigma = (4.0 * p * (1.0 - p) / n as f64).sqrt();
    assert!((mean - exact).abs() < 4.0 * sigma, "{mean} vs {exact}");
}

#[test]
fn full_lookahead_always_catches() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    assert_eq!(lookahead_baseline(&mut rng, 500, 5).unwrap(), 1.0);
}
