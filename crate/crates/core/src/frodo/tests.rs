use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::{Tape, Tensor};
use crate::envs::{StepType, Trajectory, Transition};
use crate::nn::{zero_params, AgentNetwork, Head, MetaFeature, MetaNetwork, ParamSet, ParamSpec};
use crate::optim::{DiffPolicy, OptimizerConfig};
use crate::rl::ReturnSpec;

const OBS: usize = 3;
const ACTIONS: usize = 3;

fn random_trajectory(rng: &mut ChaCha8Rng, len: usize) -> Trajectory {
    let mut transitions = Vec::new();
    for t in 0..len {
        let done = rng.gen_bool(0.2);
        let probs: Vec<f64> = (0..ACTIONS).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = probs.iter().sum();
        let action = rng.gen_range(0..ACTIONS);
        transitions.push(Transition {
            observation: (0..OBS).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            action,
            reward: rng.gen_range(-1.0..1.0),
            discount: if done { 0.0 } else { 0.9 },
            behavior_prob: probs[action] / total,
            step_type: if done {
                StepType::Last
            } else if t == 0 {
                StepType::First
            } else {
                StepType::Mid
            },
        });
    }
    Trajectory {
        transitions,
        final_observation: (0..OBS).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        completed_returns: vec![],
    }
}

fn trajectories(seed: u64, count: usize, len: usize) -> FixedTrajectories {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FixedTrajectories {
        trajectories: (0..count).map(|_| random_trajectory(&mut rng, len)).collect(),
    }
}

fn tiny(variant: Variant, m: usize, inner: OptimizerConfig, seed: u64) -> Frodo<f64> {
    let config = FrodoConfig {
        variant,
        m,
        inner_optimizer: inner,
        meta_optimizer: OptimizerConfig::rmsprop(1e-2),
        outer_return: if variant == Variant::ActorCritic {
            ReturnSpec::vtrace(0.9)
        } else {
            ReturnSpec::lambda(1.0)
        },
        ..FrodoConfig::default()
    };
    let head = match variant {
        Variant::Prediction => Head::Value,
        Variant::ActorCritic => Head::ActorCritic { num_actions: ACTIONS },
        Variant::ValueControl => Head::ActionValue { num_actions: ACTIONS },
    };
    let hidden = if variant == Variant::Prediction { vec![] } else { vec![4] };
    let agent = AgentNetwork::new(OBS, hidden, head);
    let meta = MetaNetwork::new(config.meta_features(), 3);
    Frodo::new(config, agent, meta, seed).unwrap()
}

fn total_params(f: &Frodo<f64>) -> usize {
    f.theta.numel() + f.eta.numel()
}

/// Central differences of the meta-objective over every entry of `η`.
fn finite_difference_meta_grad(f: &Frodo<f64>, data: &FixedTrajectories, frozen: Option<&Frozen<f64>>) -> ParamSet<f64> {
    let h = 1e-5;
    let mut out = f.eta.zeros_like();
    let names: Vec<String> = f.eta.names().map(str::to_string).collect();
    for name in names {
        let n = f.eta.get(&name).unwrap().numel();
        for k in 0..n {
            let eval = |delta: f64| {
                let mut eta = f.eta.clone();
                eta.get_mut(&name).unwrap().data_mut()[k] += delta;
                f.meta_objective(&eta, &mut data.clone(), frozen).unwrap()
            };
            let d = (eval(h) - eval(-h)) / (2.0 * h);
            out.get_mut(&name).unwrap().data_mut()[k] = d;
        }
    }
    out
}

fn relative_error(a: &ParamSet<f64>, b: &ParamSet<f64>) -> f64 {
    let diff = a.sub(b).unwrap().global_norm();
    diff / a.global_norm().max(b.global_norm()).max(1e-12)
}

fn check_meta_gradient(variant: Variant, m: usize, inner: OptimizerConfig, seed: u64) {
    let f = tiny(variant, m, inner, seed);
    assert!(total_params(&f) <= 200, "{} params", total_params(&f));
    let data = trajectories(seed + 100, m + 1, 4);
    let u = f.unroll(&f.eta, &mut data.clone()).unwrap();
    let analytic = u.eta.grad(&u.tape, u.total).unwrap();
    let mut frozen = u.frozen();
    if inner.diff_policy == DiffPolicy::Full {
        frozen.accumulators = None;
    }
    let numeric = finite_difference_meta_grad(&f, &data, Some(&frozen));
    let err = relative_error(&analytic, &numeric);
    assert!(analytic.global_norm() > 0.0);
    assert!(err < 1e-3, "{variant:?} M={m} {:?}: relative error {err}", inner.kind);
}

#[test]
fn meta_gradient_matches_finite_differences() {
    let sgd = OptimizerConfig::sgd(0.1);
    let rms = OptimizerConfig::rmsprop(0.05);
    for variant in [Variant::Prediction, Variant::ActorCritic] {
        for m in [1, 2, 5] {
            for inner in [sgd, rms] {
                check_meta_gradient(variant, m, inner, 7 + m as u64);
            }
        }
    }
}

#[test]
fn meta_gradient_through_full_rmsprop_and_value_control() {
    let full = OptimizerConfig {
        diff_policy: DiffPolicy::Full,
        ..OptimizerConfig::rmsprop(0.05)
    };
    check_meta_gradient(Variant::Prediction, 2, full, 3);
    check_meta_gradient(Variant::ValueControl, 2, OptimizerConfig::sgd(0.1), 4);
}

#[test]
fn stop_grad_accumulators_differ_from_unfrozen_differences() {
    let f = tiny(Variant::Prediction, 2, OptimizerConfig::rmsprop(0.05), 5);
    let data = trajectories(9, 3, 4);
    let u = f.unroll(&f.eta, &mut data.clone()).unwrap();
    let analytic = u.eta.grad(&u.tape, u.total).unwrap();
    let mut frozen = u.frozen();
    let pinned = finite_difference_meta_grad(&f, &data, Some(&frozen));
    assert!(relative_error(&analytic, &pinned) < 1e-3);
    frozen.accumulators = None;
    let unpinned = finite_difference_meta_grad(&f, &data, Some(&frozen));
    assert!(relative_error(&analytic, &unpinned) > 1e-3);
}

#[test]
fn zero_meta_lr_keeps_eta_but_moves_theta() {
    let mut f = tiny(Variant::Prediction, 3, OptimizerConfig::sgd(0.1), 1);
    f.config.meta_optimizer.lr = 0.0;
    f.eta_opt.config.lr = 0.0;
    let eta = f.eta.clone();
    let theta = f.theta.clone();
    let report = f.meta_step(&mut trajectories(2, 4, 5)).unwrap();
    assert!(!report.diverged);
    assert_eq!(f.eta, eta);
    assert!(f.theta.max_abs_diff(&theta).unwrap() > 0.0);
    assert_eq!(report.inner_losses.len(), 3);
    assert_eq!(report.trajectories.len(), 4);
}

#[test]
fn fixed_targets_disconnect_eta() {
    let mut f = tiny(Variant::Prediction, 2, OptimizerConfig::sgd(0.1), 1);
    f.config.inner_mode = InnerMode::Fixed;
    let g = f.meta_gradient(&mut trajectories(3, 3, 5)).unwrap();
    assert!(g.iter().all(|(_, t)| t.data().iter().all(|&x| x == 0.0)));
    let report = f.meta_step(&mut trajectories(3, 3, 5)).unwrap();
    assert_eq!(report.meta_grad_norm, 0.0);
}

#[test]
fn inner_updates_see_distinct_trajectories_with_current_params() {
    let mut f = tiny(Variant::Prediction, 5, OptimizerConfig::sgd(0.1), 2);
    let pool = trajectories(4, 6, 3);
    let mut roles = Vec::new();
    let mut seen_params = Vec::new();
    let mut source = |p: &ParamSet<f64>, role: Role| {
        roles.push(role);
        seen_params.push(p.clone());
        let i = match role {
            Role::Inner(i) => i,
            Role::Validation => 5,
        };
        Ok(pool.trajectories[i].clone())
    };
    f.meta_step(&mut source).unwrap();
    let expected: Vec<Role> = (0..5).map(Role::Inner).chain([Role::Validation]).collect();
    assert_eq!(roles, expected);
    for w in seen_params.windows(2) {
        assert_ne!(w[0], w[1]);
    }
    assert_eq!(seen_params.last().unwrap(), &f.theta);
}

#[test]
fn prediction_inner_loss_with_zero_eta_is_mean_square_value() {
    let f = tiny(Variant::Prediction, 1, OptimizerConfig::sgd(0.1), 3);
    let traj = trajectories(5, 1, 4).trajectories.remove(0);
    let zero_eta: ParamSet<f64> = zero_params(&f.meta);
    let tape = Tape::new();
    let theta = f.theta.to_tape(&tape, true);
    let eta = zero_eta.to_tape(&tape, true);
    let l = inner_loss(&tape, &f.config, &f.agent, &f.meta, &theta, &eta, &traj).unwrap();
    let obs = traj.observation_tensor::<f64>().unwrap();
    let v = f.agent.evaluate_values(&f.theta, &obs).unwrap();
    let expected = v[..4].iter().map(|x| x * x).sum::<f64>() / 4.0;
    assert!((tape.item(l.loss) - expected).abs() < 1e-14);
}

#[test]
fn actor_critic_inner_loss_reduces_to_entropy() {
    // zero agent and zero meta-network: uniform policy, v = g = 0
    let f = tiny(Variant::ActorCritic, 1, OptimizerConfig::sgd(0.1), 3);
    let theta: ParamSet<f64> = zero_params(&f.agent);
    let eta: ParamSet<f64> = zero_params(&f.meta);
    let traj = trajectories(6, 1, 5).trajectories.remove(0);
    let tape = Tape::new();
    let tv = theta.to_tape(&tape, true);
    let ev = eta.to_tape(&tape, true);
    let l = inner_loss(&tape, &f.config, &f.agent, &f.meta, &tv, &ev, &traj).unwrap();
    let expected = -f.config.c2 * 5.0 * (ACTIONS as f64).ln();
    assert!((tape.item(l.loss) - expected).abs() < 1e-14);
}

#[test]
fn value_control_only_moves_taken_actions() {
    let f = tiny(Variant::ValueControl, 1, OptimizerConfig::sgd(0.1), 3);
    let traj = trajectories(8, 1, 4).trajectories.remove(0);
    let tape = Tape::new();
    let theta = f.theta.to_tape(&tape, true);
    let eta = f.eta.to_tape(&tape, false);
    let mut config = f.config.clone();
    config.inner_mode = InnerMode::Fixed;
    let l = inner_loss(&tape, &config, &f.agent, &f.meta, &theta, &eta, &traj).unwrap();
    let g = theta.grad(&tape, l.loss).unwrap();
    let q_bias = g.get("agent/q/b").unwrap();
    let taken: Vec<usize> = traj.actions();
    for a in 0..ACTIONS {
        if !taken.contains(&a) {
            assert_eq!(q_bias.data()[a], 0.0);
        }
    }
}

#[test]
fn consistency_loss_properties() {
    // g already satisfies g_t = r_{t+1} + γ g_{t+1}
    let r = [0.5, -1.0, 0.25, 2.0];
    let d = [0.9, 0.8, 0.0, 0.7];
    let mut g = vec![0.0; 4];
    g[3] = 1.3;
    for t in (0..3).rev() {
        g[t] = r[t] + d[t] * g[t + 1];
    }
    for n in [1, 2, 30] {
        let tape = Tape::new();
        let gv = tape.param(Tensor::vector(g.clone()));
        let l = consistency_loss(&tape, gv, &r, &d, n).unwrap();
        assert!(tape.item(l).abs() < 1e-15);
        let grad = tape.grad(l, &[gv]).unwrap().remove(0);
        assert!(grad.data().iter().all(|x| x.abs() < 1e-15));
    }
    // γ ≡ 0
    let g = [0.1, 0.2, 0.3];
    let r = [1.0, -1.0, 2.0];
    let tape = Tape::new();
    let gv = tape.param(Tensor::vector(g.to_vec()));
    let l = consistency_loss(&tape, gv, &r, &[0.0; 3], 3).unwrap();
    let expected = 0.5 * ((1.0f64 - 0.1).powi(2) + (-1.0f64 - 0.2).powi(2));
    assert!((tape.item(l) - expected).abs() < 1e-15);
    // gradient reaches g only through the compared entries, never the target
    let grad = tape.grad(l, &[gv]).unwrap().remove(0);
    assert!((grad.data()[0] - (0.1 - 1.0)).abs() < 1e-15);
    assert!((grad.data()[1] - (0.2 + 1.0)).abs() < 1e-15);
    assert_eq!(grad.data()[2], 0.0);
}

#[test]
fn consistency_at_fixed_point_gives_eta_no_gradient() {
    // a meta-network with zero weights outputs 0, which is consistent when
    // every reward is 0
    let mut f = tiny(Variant::Prediction, 2, OptimizerConfig::sgd(0.1), 1);
    f.eta = zero_params(&f.meta);
    f.config.consistency_weight = 1.0;
    let mut data = trajectories(12, 3, 5);
    for t in &mut data.trajectories[..2] {
        for tr in &mut t.transitions {
            tr.reward = 0.0;
        }
    }
    let with = f.unroll(&f.eta, &mut data.clone()).unwrap();
    assert_eq!(with.consistency, 0.0);
    let g_with = with.eta.grad(&with.tape, with.total).unwrap();
    f.config.consistency_weight = 0.0;
    let g_without = f.meta_gradient(&mut data.clone()).unwrap();
    assert!(g_with.max_abs_diff(&g_without).unwrap() < 1e-15);
}

#[test]
fn vtrace_outer_loss_on_policy_matches_lambda_return() {
    let f = tiny(Variant::ActorCritic, 1, OptimizerConfig::sgd(0.1), 4);
    let mut traj = trajectories(13, 1, 5).trajectories.remove(0);
    // make μ equal to π so every ratio is one
    let obs = traj.observation_tensor::<f64>().unwrap();
    for (t, tr) in traj.transitions.iter_mut().enumerate() {
        let row = &obs.data()[t * OBS..(t + 1) * OBS];
        tr.behavior_prob = f.agent.action_probs(&f.theta, row, 0.0).unwrap()[tr.action];
    }
    let eval = |spec: ReturnSpec| {
        let mut config = f.config.clone();
        config.outer_return = spec;
        let tape = Tape::new();
        let theta = f.theta.to_tape(&tape, true);
        let l = outer_loss(&tape, &config, &f.agent, &theta, &traj).unwrap();
        (tape.item(l.loss), theta.grad(&tape, l.loss).unwrap())
    };
    let (a, ga) = eval(ReturnSpec::vtrace(1.0));
    let (b, gb) = eval(ReturnSpec::lambda(1.0));
    assert!((a - b).abs() < 1e-12);
    assert!(ga.max_abs_diff(&gb).unwrap() < 1e-12);
}

fn policy_entropy(f: &Frodo<f64>, theta: &ParamSet<f64>, traj: &Trajectory) -> f64 {
    let obs = traj.observation_tensor::<f64>().unwrap();
    (0..traj.len())
        .map(|t| {
            let p = f.agent.action_probs(theta, &obs.data()[t * OBS..(t + 1) * OBS], 0.0).unwrap();
            -p.iter().map(|x| x * x.ln()).sum::<f64>()
        })
        .sum()
}

#[test]
fn larger_entropy_weight_gives_higher_entropy() {
    let data = trajectories(14, 2, 5);
    let run = |c2: f64| {
        let mut f = tiny(Variant::ActorCritic, 1, OptimizerConfig::sgd(0.05), 6);
        f.config.inner_mode = InnerMode::Fixed;
        f.config.c2 = c2;
        f.meta_step(&mut data.clone()).unwrap();
        policy_entropy(&f, &f.theta, &data.trajectories[0])
    };
    assert!(run(1.0) > run(0.0));
}

#[test]
fn direct_loss_mode() {
    let mut f = tiny(Variant::Prediction, 2, OptimizerConfig::sgd(0.1), 8);
    f.config.inner_mode = InnerMode::DirectLoss;
    f.meta = MetaNetwork::new(f.config.meta_features(), 3);
    assert!(f.meta.features.contains(&MetaFeature::Value));
    f.eta = crate::nn::init_params(&f.meta, 8);
    f.eta_opt = crate::optim::OptimizerState::new(f.config.meta_optimizer, &f.eta);

    // η ≡ 0: no inner loss, θ stays put
    let mut zero = f.clone();
    zero.eta = zero_params(&zero.meta);
    let theta = zero.theta.clone();
    let data = trajectories(15, 3, 4);
    let report = zero.meta_step(&mut data.clone()).unwrap();
    assert!(report.inner_losses.iter().all(|&l| l == 0.0));
    assert_eq!(zero.theta, theta);
    assert!(report.target_divergence.is_nan());

    // finite and checkable meta-gradient
    let u = f.unroll(&f.eta, &mut data.clone()).unwrap();
    let analytic = u.eta.grad(&u.tape, u.total).unwrap();
    let numeric = finite_difference_meta_grad(&f, &data, Some(&u.frozen()));
    assert!(analytic.is_finite());
    assert!(relative_error(&analytic, &numeric) < 1e-3);

    // target mode moves θ differently
    let mut target = tiny(Variant::Prediction, 2, OptimizerConfig::sgd(0.1), 8);
    target.theta = f.theta.clone();
    let mut direct = f.clone();
    target.meta_step(&mut data.clone()).unwrap();
    direct.meta_step(&mut data.clone()).unwrap();
    assert!(target.theta.max_abs_diff(&direct.theta).unwrap() > 1e-9);
}

#[test]
fn target_divergence_examples() {
    assert_eq!(target_divergence(&[0.3, -0.2], &[0.3, -0.2]).unwrap(), 0.0);
    assert_eq!(target_divergence(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 1.0);
    assert!(target_divergence(&[1.0], &[0.0, 0.0]).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let n = rng.gen_range(1..10);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let mut acc = 0.0;
        for i in 0..n {
            acc += (a[i] - b[i]).powi(2);
        }
        assert!((target_divergence(&a, &b).unwrap() - acc / n as f64).abs() < 1e-12);
    }
}

#[test]
fn meta_steps_are_deterministic() {
    let run = || {
        let mut f = tiny(Variant::ActorCritic, 2, OptimizerConfig::rmsprop(0.05), 21);
        let mut reports = Vec::new();
        for k in 0..3 {
            reports.push(f.meta_step(&mut trajectories(30 + k, 3, 4)).unwrap());
        }
        (f.theta, f.eta, reports)
    };
    assert_eq!(run(), run());
}

#[test]
fn config_validation() {
    let mut c = FrodoConfig::default();
    assert!(c.validate().is_ok());
    c.m = 0;
    assert!(c.validate().is_err());
    let c = FrodoConfig {
        consistency_weight: -1.0,
        ..FrodoConfig::default()
    };
    assert!(c.validate().is_err());
    let f = tiny(Variant::Prediction, 1, OptimizerConfig::sgd(0.1), 0);
    let small_meta = MetaNetwork::new(vec![MetaFeature::Reward], 2);
    let eta = crate::nn::init_params(&small_meta, 0);
    assert!(Frodo::with_params(f.config.clone(), f.agent.clone(), small_meta, f.theta.clone(), eta).is_err());
    assert_eq!(Variant::parse("actor_critic"), Some(Variant::ActorCritic));
    assert_eq!(InnerMode::parse("direct_loss"), Some(InnerMode::DirectLoss));
    assert!(f.meta.param_shapes().len() == 5);
}



#[test]
fn meta_gradient_with_consistency_matches_finite_differences() {
    let mut f = tiny(Variant::Prediction, 2, OptimizerConfig::sgd(0.1), 31);
    f.config.consistency_weight = 0.5;
    f.config.consistency_n = 2;
    let data = trajectories(131, 3, 5);
    let u = f.unroll(&f.eta, &mut data.clone()).unwrap();
    assert!(u.consistency > 0.0);
    let analytic = u.eta.grad(&u.tape, u.total).unwrap();
    let numeric = finite_difference_meta_grad(&f, &data, Some(&u.frozen()));
    let err = relative_error(&analytic, &numeric);
    assert!(err < 1e-3, "relative error {err}");
}
