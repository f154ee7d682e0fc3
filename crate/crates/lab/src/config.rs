use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use frodo_core::frodo::{FrodoConfig, InnerMode, Variant};
use frodo_core::optim::{DiffPolicy, OptimizerConfig, OptimizerKind};
use frodo_core::rl::{ReturnKind, ReturnSpec};
use serde::Deserialize;

use crate::error::{LabError, LabResult};

/// The studies the runner knows how to reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    CatchFrodo,
    WalkFrodo,
    WalkTdLambda,
    CatchLookaheadBaseline,
    OffpolicyCatchFrodo,
    AblationTargetVsLoss,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::CatchFrodo,
        Experiment::WalkFrodo,
        Experiment::WalkTdLambda,
        Experiment::CatchLookaheadBaseline,
        Experiment::OffpolicyCatchFrodo,
        Experiment::AblationTargetVsLoss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::CatchFrodo => "catch_frodo",
            Experiment::WalkFrodo => "walk_frodo",
            Experiment::WalkTdLambda => "walk_td_lambda",
            Experiment::CatchLookaheadBaseline => "catch_lookahead_baseline",
            Experiment::OffpolicyCatchFrodo => "offpolicy_catch_frodo",
            Experiment::AblationTargetVsLoss => "ablation_target_vs_loss",
        }
    }

    pub fn is_walk(self) -> bool {
        matches!(self, Experiment::WalkFrodo | Experiment::WalkTdLambda)
    }

    /// Whether a meta-learner is trained (as opposed to a classic baseline).
    pub fn is_frodo(self) -> bool {
        !matches!(self, Experiment::WalkTdLambda | Experiment::CatchLookaheadBaseline)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = LabError;

    fn from_str(s: &str) -> LabResult<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                LabError::config(format!("unknown experiment `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

/// Parses `1..10` (inclusive), `3`, or `1,4,7`.
pub fn parse_seeds(s: &str) -> LabResult<Vec<u64>> {
    let bad = || LabError::config(format!("bad seed list `{s}`"));
    let s = s.trim();
    let seeds = if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|x| x.trim().parse::<u64>().map_err(|_| bad()))
            .collect::<LabResult<Vec<_>>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != seeds.len() {
        return Err(LabError::config(format!("duplicate seeds in `{s}`")));
    }
    Ok(seeds)
}

fn parse_list<T: FromStr>(what: &str, s: &str) -> LabResult<Vec<T>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| LabError::config(format!("bad {what} list `{s}`")))
        })
        .collect()
}

/// Every knob of a run. Each can come from the config file or a flag; flags
/// win. Unset knobs take the experiment's defaults, listed per flag.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Experiment name, one of catch_frodo, walk_frodo, walk_td_lambda,
    /// catch_lookahead_baseline, offpolicy_catch_frodo, ablation_target_vs_loss
    #[arg(long)]
    pub experiment: Option<String>,
    /// Seeds as `1..10` (inclusive) or `1,2,3` [default: 1..10]
    #[arg(long)]
    pub seeds: Option<String>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Environment steps per seed [default: 1000000 catch, 2000000 walk]
    #[arg(long)]
    pub total_env_steps: Option<u64>,
    /// Environment steps between CSV rows [default: 10000 catch, 9600 walk]
    #[arg(long)]
    pub log_every: Option<u64>,
    /// Inner updates per meta-update [default: 1 catch, 5 walk]
    #[arg(long)]
    pub m: Option<usize>,
    /// Agent learning rate [default: 3e-3 catch, 0.1 walk]
    #[arg(long)]
    pub inner_lr: Option<f64>,
    /// Meta learning rate [default: 3e-3 catch, 1e-2 walk]
    #[arg(long)]
    pub meta_lr: Option<f64>,
    /// Agent optimizer, sgd or rmsprop [default: rmsprop]
    #[arg(long)]
    pub inner_optimizer: Option<String>,
    /// Meta optimizer, sgd or rmsprop [default: rmsprop]
    #[arg(long)]
    pub meta_optimizer: Option<String>,
    /// RMSProp decay of both optimizers [default: 0.99]
    #[arg(long)]
    pub rmsprop_decay: Option<f64>,
    /// RMSProp epsilon of both optimizers [default: 1e-5 catch, 0.1 walk]
    #[arg(long)]
    pub rmsprop_eps: Option<f64>,
    /// How the meta-gradient treats the agent optimizer's second moments,
    /// full or stop_grad [default: stop_grad]
    #[arg(long)]
    pub diff_policy: Option<String>,
    /// Baseline weight [default: 0.5]
    #[arg(long)]
    pub c1: Option<f64>,
    /// Entropy weight [default: 0.01]
    #[arg(long)]
    pub c2: Option<f64>,
    /// Consistency loss weight [default: 0.1 control, 0 walk]
    #[arg(long)]
    pub consistency_weight: Option<f64>,
    /// Consistency n-step horizon [default: 30]
    #[arg(long)]
    pub consistency_n: Option<usize>,
    /// What the meta-network output is, target or direct_loss [default: target]
    #[arg(long)]
    pub inner_mode: Option<String>,
    /// Outer-loss return: monte_carlo, lambda_return, vtrace, n_step or
    /// one_step_td [default: monte_carlo catch, lambda_return walk, vtrace off-policy]
    #[arg(long)]
    pub outer_return: Option<String>,
    /// λ of the outer return [default: 1]
    #[arg(long)]
    pub outer_lambda: Option<f64>,
    /// Feed π(A|S) and μ(A|S) to the meta-network [default: true off-policy, false otherwise]
    #[arg(long)]
    pub policy_features: Option<bool>,
    /// Agent torso widths, comma separated; empty for linear [default: 64 catch, linear walk]
    #[arg(long)]
    pub agent_hidden: Option<String>,
    /// Meta-network LSTM width [default: 32]
    #[arg(long)]
    pub meta_hidden: Option<usize>,
    /// Transitions per inner trajectory [default: 3 catch, 16 walk]
    #[arg(long)]
    pub trajectory_len: Option<usize>,
    /// Learner updates between actor parameter refreshes [default: 10 off-policy, 0 otherwise]
    #[arg(long)]
    pub lag: Option<usize>,
    /// Walk steps between flips of the left reward [default: 960]
    #[arg(long)]
    pub switch_period: Option<usize>,
    /// Discount inside episodes [default: 1]
    #[arg(long)]
    pub discount: Option<f64>,
    /// TD(λ) grid, comma separated [default: 0,0.4,0.8,0.9,0.99,1]
    #[arg(long)]
    pub lambdas: Option<String>,
    /// TD(λ) step size [default: 0.1]
    #[arg(long)]
    pub td_lr: Option<f64>,
    /// Completed episodes in the trailing return window [default: 200]
    #[arg(long)]
    pub return_window: Option<usize>,
    /// Global-norm clip of agent gradients [default: 10000]
    #[arg(long)]
    pub inner_clip: Option<f64>,
    /// Global-norm clip of meta-gradients [default: 10000]
    #[arg(long)]
    pub meta_clip: Option<f64>,
    /// Worker threads [default: available cores]
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Overrides {
    pub fn from_toml_file(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> LabResult<Self> {
        toml::from_str(text).map_err(|e| LabError::config(format!("config file: {e}")))
    }

    /// Fields set here replace those of `base`.
    pub fn over(self, base: Overrides) -> Overrides {
        macro_rules! pick {
            ($($f:ident),*) => { Overrides { $($f: self.$f.or(base.$f)),* } };
        }
        pick!(
            experiment, seeds, out, total_env_steps, log_every, m, inner_lr, meta_lr, inner_optimizer,
            meta_optimizer, rmsprop_decay, rmsprop_eps, diff_policy, c1, c2, consistency_weight, consistency_n,
            inner_mode, outer_return, outer_lambda, policy_features, agent_hidden, meta_hidden, trajectory_len,
            lag, switch_period, discount, lambdas, td_lr, return_window, inner_clip, meta_clip, threads
        )
    }
}

/// A fully resolved run description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seeds: Vec<u64>,
    pub total_env_steps: u64,
    pub log_every: u64,
    pub frodo: FrodoConfig,
    pub agent_hidden: Vec<usize>,
    pub meta_hidden: usize,
    pub trajectory_len: usize,
    pub lag: usize,
    pub switch_period: usize,
    pub discount: f64,
    pub lambdas: Vec<f64>,
    pub td_lr: f64,
    pub return_window: usize,
    pub threads: usize,
    pub out: PathBuf,
}

pub const TD_LAMBDA_GRID: [f64; 6] = [0.0, 0.4, 0.8, 0.9, 0.99, 1.0];

fn optimizer(kind: &str, lr: f64, decay: f64, eps: f64, diff: DiffPolicy) -> LabResult<OptimizerConfig> {
    let kind = OptimizerKind::parse(kind).ok_or_else(|| LabError::config(format!("unknown optimizer `{kind}`")))?;
    let base = match kind {
        OptimizerKind::Sgd => OptimizerConfig::sgd(lr),
        OptimizerKind::RmsProp => OptimizerConfig { decay, eps, ..OptimizerConfig::rmsprop(lr) },
    };
    Ok(OptimizerConfig { diff_policy: diff, ..base })
}

fn parse_diff_policy(s: &str) -> LabResult<DiffPolicy> {
    match s {
        "stop_grad" => Ok(DiffPolicy::StopGradAccumulators),
        other => DiffPolicy::parse(other).ok_or_else(|| LabError::config(format!("unknown diff policy `{other}`"))),
    }
}

impl ExperimentConfig {
    /// Resolves `flags` over `file` over the experiment defaults.
    pub fn resolve(flags: Overrides, file: Overrides) -> LabResult<Self> {
        let o = flags.over(file);
        let experiment: Experiment = o
            .experiment
            .as_deref()
            .ok_or_else(|| LabError::config("no experiment given"))?
            .parse()?;
        let walk = experiment.is_walk();
        let offpolicy = experiment == Experiment::OffpolicyCatchFrodo;
        let out = o.out.clone().ok_or_else(|| LabError::config("no output directory given (--out)"))?;

        let seeds = parse_seeds(o.seeds.as_deref().unwrap_or("1..10"))?;
        let total_env_steps = o.total_env_steps.unwrap_or(if walk { 2_000_000 } else { 1_000_000 });
        let log_every = o.log_every.unwrap_or(if walk { 9600 } else { 10_000 });

        let decay = o.rmsprop_decay.unwrap_or(0.99);
        let eps = o.rmsprop_eps.unwrap_or(if walk { 0.1 } else { 1e-5 });
        let diff = parse_diff_policy(o.diff_policy.as_deref().unwrap_or("stop_grad"))?;
        let inner_optimizer = optimizer(
            o.inner_optimizer.as_deref().unwrap_or("rmsprop"),
            o.inner_lr.unwrap_or(if walk { 0.1 } else { 3e-3 }),
            decay,
            eps,
            diff,
        )?;
        let meta_optimizer = optimizer(
            o.meta_optimizer.as_deref().unwrap_or("rmsprop"),
            o.meta_lr.unwrap_or(if walk { 1e-2 } else { 3e-3 }),
            decay,
            eps,
            diff,
        )?;

        let default_return = if walk {
            "lambda_return"
        } else if offpolicy {
            "vtrace"
        } else {
            "monte_carlo"
        };
        let kind_name = o.outer_return.as_deref().unwrap_or(default_return);
        let kind =
            ReturnKind::parse(kind_name).ok_or_else(|| LabError::config(format!("unknown return `{kind_name}`")))?;
        let outer_return = ReturnSpec {
            kind,
            lambda: o.outer_lambda.unwrap_or(1.0),
            n: 1,
            ..ReturnSpec::default()
        };

        let inner_mode = match o.inner_mode.as_deref().unwrap_or("target") {
            "target" => InnerMode::Target,
            "direct_loss" => InnerMode::DirectLoss,
            "fixed" => InnerMode::Fixed,
            other => return Err(LabError::config(format!("unknown inner mode `{other}`"))),
        };

        let frodo = FrodoConfig {
            variant: if walk { Variant::Prediction } else { Variant::ActorCritic },
            inner_mode,
            m: o.m.unwrap_or(if walk { 5 } else { 1 }),
            inner_optimizer,
            meta_optimizer,
            c1: o.c1.unwrap_or(0.5),
            c2: o.c2.unwrap_or(0.01),
            consistency_weight: o.consistency_weight.unwrap_or(if walk { 0.0 } else { 0.1 }),
            consistency_n: o.consistency_n.unwrap_or(30),
            outer_return,
            policy_features: o.policy_features.unwrap_or(offpolicy),
            inner_clip: o.inner_clip.unwrap_or(1e4),
            meta_clip: o.meta_clip.unwrap_or(1e4),
            ..FrodoConfig::default()
        };

        let agent_hidden = match &o.agent_hidden {
            Some(s) => parse_list("agent_hidden", s)?,
            None if walk => Vec::new(),
            None => vec![64],
        };
        let lambdas = match &o.lambdas {
            Some(s) => parse_list("lambdas", s)?,
            None => TD_LAMBDA_GRID.to_vec(),
        };
        let threads = o
            .threads
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));

        let config = ExperimentConfig {
            experiment,
            seeds,
            total_env_steps,
            log_every,
            frodo,
            agent_hidden,
            meta_hidden: o.meta_hidden.unwrap_or(32),
            trajectory_len: o.trajectory_len.unwrap_or(if walk { 16 } else { 3 }),
            lag: o.lag.unwrap_or(if offpolicy { 10 } else { 0 }),
            switch_period: o.switch_period.unwrap_or(960),
            discount: o.discount.unwrap_or(1.0),
            lambdas,
            td_lr: o.td_lr.unwrap_or(0.1),
            return_window: o.return_window.unwrap_or(200),
            threads,
            out,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> LabResult<()> {
        let bad = |msg: &str| Err(LabError::config(msg.to_string()));
        if self.seeds.is_empty() {
            return bad("seeds must be nonempty");
        }
        if self.total_env_steps == 0 {
            return bad("total_env_steps must be positive");
        }
        if self.log_every == 0 {
            return bad("log_every must be positive");
        }
        if self.trajectory_len == 0 {
            return bad("trajectory_len must be positive");
        }
        if self.meta_hidden == 0 || self.agent_hidden.contains(&0) {
            return bad("layer widths must be positive");
        }
        if self.switch_period == 0 {
            return bad("switch_period must be positive");
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return bad("discount must lie in [0, 1]");
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return bad("lambdas must be a nonempty list in [0, 1]");
        }
        if !(self.td_lr > 0.0) {
            return bad("td_lr must be positive");
        }
        if self.return_window == 0 {
            return bad("return_window must be positive");
        }
        if self.threads == 0 {
            return bad("threads must be positive");
        }
        if !(self.frodo.inner_lr() > 0.0) {
            return bad("inner_lr must be positive");
        }
        if !(self.frodo.meta_lr() >= 0.0) {
            return bad("meta_lr must be non-negative");
        }
        if self.lag > 0 && self.experiment != Experiment::OffpolicyCatchFrodo {
            return bad("lag only applies to offpolicy_catch_frodo");
        }
        if self.experiment == Experiment::AblationTargetVsLoss && self.frodo.inner_mode != InnerMode::Target {
            return bad("ablation_target_vs_loss runs both inner modes itself");
        }
        self.frodo.validate().map_err(|e| LabError::config(e.to_string()))
    }
}
