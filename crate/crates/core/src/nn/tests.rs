use super::*;
use crate::autodiff::gradcheck::{max_relative_error, numeric_gradient};
use crate::autodiff::{Tape, Tensor, Var};

fn seq(n: usize, seed: u64) -> Vec<f64> {
    (0..n)
        .map(|i| (((i as u64 + 1) * 2654435761 + seed * 97) % 1000) as f64 / 250.0 - 2.0)
        .collect()
}

/// Checks the gradient of `loss(params)` for every entry of a parameter set.
fn check_param_grads(params: &ParamSet<f64>, loss: impl Fn(&Tape<f64>, &VarSet) -> Var, tol: f64) {
    let tape = Tape::new();
    let vars = params.to_tape(&tape, true);
    let l = loss(&tape, &vars);
    let grads = vars.grad(&tape, l).unwrap();
    for (name, value) in params.iter() {
        let numeric = numeric_gradient(
            |probe| {
                let mut p = params.clone();
                *p.get_mut(name).unwrap() = probe.clone();
                let tape = Tape::new();
                let vars = p.to_tape(&tape, true);
                let l = loss(&tape, &vars);
                tape.item(l)
            },
            value,
            1e-5,
        );
        let err = max_relative_error(grads.get(name).unwrap(), &numeric);
        assert!(err < tol, "{name}: relative error {err}");
    }
}

#[test]
fn mlp_zero_weights_give_zero() {
    let mlp = Mlp::new("m", vec![3, 4, 2], false);
    let p: ParamSet<f64> = zero_params(&mlp);
    let tape = Tape::new();
    let vars = p.to_tape(&tape, true);
    let x = tape.constant(Tensor::new(vec![2, 3], seq(6, 1)).unwrap());
    let y = mlp.forward(&tape, &vars, x).unwrap();
    assert_eq!(*tape.value(y), Tensor::zeros(&[2, 2]));
}

#[test]
fn mlp_identity_layer_passes_input() {
    let mlp = Mlp::new("m", vec![1, 1], false);
    let mut p: ParamSet<f64> = zero_params(&mlp);
    *p.get_mut("m/0/w").unwrap() = Tensor::from_f64(&[1, 1], &[1.0]).unwrap();
    let tape = Tape::new();
    let vars = p.to_tape(&tape, false);
    let x = tape.constant(Tensor::from_f64(&[3, 1], &[0.5, -1.5, 2.0]).unwrap());
    let y = mlp.forward(&tape, &vars, x).unwrap();
    assert_eq!(tape.value(y).data(), &[0.5, -1.5, 2.0]);
}

#[test]
fn mlp_rejects_wrong_width() {
    let mlp = Mlp::new("m", vec![3, 2], false);
    let p: ParamSet<f64> = zero_params(&mlp);
    let tape = Tape::new();
    let vars = p.to_tape(&tape, false);
    let x = tape.constant(Tensor::zeros(&[2, 4]));
    assert!(mlp.forward(&tape, &vars, x).is_err());
}

#[test]
fn mlp_gradients_match_finite_differences() {
    let mlp = Mlp::new("m", vec![3, 5, 4, 2], false);
    let p: ParamSet<f64> = init_params(&mlp, 2);
    let x = Tensor::new(vec![4, 3], seq(12, 3)).unwrap();
    check_param_grads(
        &p,
        |tape, vars| {
            let xv = tape.constant(x.clone());
            let y = mlp.forward(tape, vars, xv).unwrap();
            tape.sum(y).unwrap()
        },
        1e-6,
    );
}

fn lstm_run(tape: &Tape<f64>, cell: &LstmCell, vars: &VarSet, c0: &[f64]) -> (Var, Var) {
    let x = tape.constant(Tensor::new(vec![1, cell.input_size], seq(cell.input_size, 4)).unwrap());
    let h = tape.constant(Tensor::new(vec![1, cell.hidden], seq(cell.hidden, 5)).unwrap());
    let c = tape.constant(Tensor::from_f64(&[1, cell.hidden], c0).unwrap());
    lstm_step(cell, tape, vars, x, h, c).unwrap()
}

#[test]
fn lstm_zero_params_zero_state() {
    let cell = LstmCell::new("l", 3, 4);
    let p: ParamSet<f64> = zero_params(&cell);
    let tape = Tape::new();
    let vars = p.to_tape(&tape, false);
    let x = tape.constant(Tensor::new(vec![1, 3], seq(3, 1)).unwrap());
    let z = tape.constant(Tensor::zeros(&[1, 4]));
    let (h, _) = cell.step(&tape, &vars, x, z, z).unwrap();
    assert_eq!(*tape.value(h), Tensor::zeros(&[1, 4]));
}

#[test]
fn lstm_saturated_gates_keep_cell() {
    let cell = LstmCell::new("l", 2, 3);
    let mut p: ParamSet<f64> = init_params(&cell, 9);
    let b = p.get_mut("l/b").unwrap();
    for j in 0..3 {
        b.data_mut()[j] = -1e6; // input gate
        b.data_mut()[3 + j] = 1e6; // forget gate
    }
    let tape = Tape::new();
    let vars = p.to_tape(&tape, false);
    let c0 = [0.3, -0.7, 1.1];
    let (_, c1) = lstm_run(&tape, &cell, &vars, &c0);
    for (a, b) in tape.value(c1).data().iter().zip(c0) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn lstm_gradients_match_finite_differences() {
    let cell = LstmCell::new("l", 3, 4);
    let p: ParamSet<f64> = init_params(&cell, 10);
    let c0 = seq(4, 6);
    check_param_grads(
        &p,
        |tape, vars| {
            let (h, _) = lstm_run(tape, &cell, vars, &c0);
            tape.sum(h).unwrap()
        },
        1e-6,
    );
}

fn prediction_meta(hidden: usize) -> MetaNetwork {
    MetaNetwork::new(
        vec![MetaFeature::Reward, MetaFeature::Discount, MetaFeature::NextValue],
        hidden,
    )
}

fn meta_inputs(tape: &Tape<f64>, r: &[f64], d: &[f64], v: Var) -> MetaInputs {
    MetaInputs::new()
        .with(MetaFeature::Reward, tape.constant(Tensor::vector(r.to_vec())))
        .with(MetaFeature::Discount, tape.constant(Tensor::vector(d.to_vec())))
        .with(MetaFeature::NextValue, v)
}

#[test]
fn meta_zero_eta_gives_zero_targets() {
    let meta = prediction_meta(5);
    let eta: ParamSet<f64> = zero_params(&meta);
    let tape = Tape::new();
    let vars = eta.to_tape(&tape, true);
    let v = tape.constant(Tensor::vector(seq(6, 1)));
    let g = meta
        .forward(&tape, &vars, &meta_inputs(&tape, &seq(6, 2), &[1.0; 6], v))
        .unwrap();
    assert_eq!(*tape.value(g), Tensor::zeros(&[6]));
}

#[test]
fn meta_gradients_reach_eta_and_next_value() {
    let meta = prediction_meta(4);
    let eta: ParamSet<f64> = init_params(&meta, 3);
    let r = seq(5, 7);
    let d = [1.0, 1.0, 0.0, 1.0, 1.0];
    let v0 = Tensor::vector(seq(5, 8));
    let tape = Tape::new();
    let vars = eta.to_tape(&tape, true);
    let v = tape.param(v0.clone());
    let g = meta.forward(&tape, &vars, &meta_inputs(&tape, &r, &d, v)).unwrap();
    let l = tape.sum(g).unwrap();
    let ge = vars.grad(&tape, l).unwrap();
    assert!(ge.global_norm() > 0.0);
    let gv = tape.grad(l, &[v]).unwrap().remove(0);
    assert!(gv.data().iter().any(|&x| x != 0.0));
    let numeric = numeric_gradient(
        |probe| {
            let tape = Tape::new();
            let vars = eta.to_tape(&tape, false);
            let v = tape.constant(probe.clone());
            let g = meta.forward(&tape, &vars, &meta_inputs(&tape, &r, &d, v)).unwrap();
            tape.value(g).data().iter().sum()
        },
        &v0,
        1e-5,
    );
    assert!(max_relative_error(&gv, &numeric) < 1e-6);

    check_param_grads(
        &eta,
        |tape, vars| {
            let v = tape.constant(v0.clone());
            let g = meta.forward(tape, vars, &meta_inputs(tape, &r, &d, v)).unwrap();
            let g = tape.square(g).unwrap();
            tape.sum(g).unwrap()
        },
        1e-6,
    );
}

#[test]
fn meta_outputs_depend_only_on_the_future() {
    let meta = prediction_meta(6);
    let eta: ParamSet<f64> = init_params(&meta, 21);
    let run = |r: &[f64]| -> Vec<f64> {
        let tape = Tape::new();
        let vars = eta.to_tape(&tape, false);
        let v = tape.constant(Tensor::vector(seq(r.len(), 3)));
        let g = meta
            .forward(&tape, &vars, &meta_inputs(&tape, r, &vec![1.0; r.len()], v))
            .unwrap();
        tape.value(g).data().to_vec()
    };
    let r = seq(8, 4);
    let base = run(&r);
    for k in 0..8 {
        let mut changed = r.clone();
        changed[k] += 0.75;
        let out = run(&changed);
        for t in 0..8 {
            if t > k {
                assert_eq!(out[t], base[t], "step {t} saw a change at {k}");
            }
        }
        assert_ne!(out[k], base[k]);
    }
}

#[test]
fn meta_rejects_length_mismatch_and_missing_features() {
    let meta = prediction_meta(3);
    let eta: ParamSet<f64> = init_params(&meta, 1);
    let tape = Tape::new();
    let vars = eta.to_tape(&tape, false);
    let v = tape.constant(Tensor::vector(vec![0.0; 4]));
    let bad = meta_inputs(&tape, &[0.0; 5], &[1.0; 5], v);
    assert!(meta.forward(&tape, &vars, &bad).is_err());
    let missing = MetaInputs::new().with(MetaFeature::Reward, v);
    assert!(meta.forward(&tape, &vars, &missing).is_err());
}

#[test]
fn agent_heads_have_expected_shapes_and_every_param_gets_a_gradient() {
    let net = AgentNetwork::new(4, vec![6, 5], Head::ActorCritic { num_actions: 3 });
    let p: ParamSet<f64> = init_params(&net, 4);
    let tape = Tape::new();
    let vars = p.to_tape(&tape, true);
    let obs = tape.constant(Tensor::new(vec![7, 4], seq(28, 2)).unwrap());
    let out = net.forward(&tape, &vars, obs).unwrap();
    assert_eq!(tape.shape(out.values().unwrap()), vec![7]);
    assert_eq!(tape.shape(out.logits().unwrap()), vec![7, 3]);
    let a = tape.sum(out.values().unwrap()).unwrap();
    let b = tape.sum(out.logits().unwrap()).unwrap();
    let l = tape.add(a, b).unwrap();
    let g = vars.grad(&tape, l).unwrap();
    assert_eq!(g.len(), p.len());
    for (name, t) in g.iter() {
        assert!(t.data().iter().any(|&x| x != 0.0), "{name} got no gradient");
    }
    let probs = net.action_probs(&p, &seq(4, 2), 0.0).unwrap();
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn greedy_action_value_policy() {
    let net = AgentNetwork::new(2, vec![], Head::ActionValue { num_actions: 3 });
    let mut p: ParamSet<f64> = zero_params(&net);
    *p.get_mut("agent/q/b").unwrap() = Tensor::vector(vec![1.0, 5.0, 3.0]);
    let probs = net.action_probs(&p, &[0.0, 0.0], 0.3).unwrap();
    assert!((probs[1] - 0.8).abs() < 1e-12);
    assert!((probs[0] - 0.1).abs() < 1e-12);
}
