use crate::error::{Error, Result};
use crate::nn::MetaFeature;
use crate::optim::OptimizerConfig;
use crate::rl::{ReturnKind, ReturnSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// State values regress towards the learned target.
    Prediction,
    /// Taken-action values regress towards the learned target.
    ValueControl,
    /// Advantage actor-critic built on the learned target.
    ActorCritic,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Prediction => "prediction",
            Variant::ValueControl => "value_control",
            Variant::ActorCritic => "actor_critic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Variant::Prediction, Variant::ValueControl, Variant::ActorCritic]
            .into_iter()
            .find(|v| v.name() == s)
    }
}

/// What the meta-network output means inside the inner loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerMode {
    /// Outputs are update targets.
    Target,
    /// Outputs are summed and used as the loss itself.
    DirectLoss,
    /// The meta-network is bypassed; targets come from `fixed_target`.
    Fixed,
}

impl InnerMode {
    pub fn name(self) -> &'static str {
        match self {
            InnerMode::Target => "target",
            InnerMode::DirectLoss => "direct_loss",
            InnerMode::Fixed => "fixed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [InnerMode::Target, InnerMode::DirectLoss, InnerMode::Fixed]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrodoConfig {
    pub variant: Variant,
    pub inner_mode: InnerMode,
    /// Inner updates per meta-update.
    pub m: usize,
    pub inner_optimizer: OptimizerConfig,
    pub meta_optimizer: OptimizerConfig,
    /// Baseline weight.
    pub c1: f64,
    /// Entropy weight.
    pub c2: f64,
    pub consistency_weight: f64,
    pub consistency_n: usize,
    pub outer_return: ReturnSpec,
    /// Target used when `inner_mode` is `Fixed`.
    pub fixed_target: ReturnSpec,
    /// Also feed `π(A|S)` and `μ(A|S)` to the meta-network.
    pub policy_features: bool,
    pub inner_clip: f64,
    pub meta_clip: f64,
}

impl Default for FrodoConfig {
    fn default() -> Self {
        FrodoConfig {
            variant: Variant::Prediction,
            inner_mode: InnerMode::Target,
            m: 5,
            inner_optimizer: OptimizerConfig::rmsprop(1e-3),
            meta_optimizer: OptimizerConfig::rmsprop(1e-4),
            c1: 0.5,
            c2: 0.01,
            consistency_weight: 0.0,
            consistency_n: 30,
            outer_return: ReturnSpec::lambda(1.0),
            fixed_target: ReturnSpec {
                kind: ReturnKind::OneStepTd,
                ..ReturnSpec::default()
            },
            policy_features: false,
            inner_clip: 1e4,
            meta_clip: 1e4,
        }
    }
}

impl FrodoConfig {
    pub fn inner_lr(&self) -> f64 {
        self.inner_optimizer.lr
    }

    pub fn meta_lr(&self) -> f64 {
        self.meta_optimizer.lr
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::invalid("M must be at least 1"));
        }
        if !(self.consistency_weight >= 0.0) {
            return Err(Error::invalid("consistency weight must be >= 0"));
        }
        if self.consistency_n < 1 {
            return Err(Error::invalid("consistency n must be at least 1"));
        }
        if !(self.inner_clip > 0.0 && self.meta_clip > 0.0) {
            return Err(Error::invalid("clip norms must be positive"));
        }
        if self.policy_features && self.variant != Variant::ActorCritic {
            return Err(Error::invalid("policy features need the actor-critic variant"));
        }
        self.inner_optimizer.validate()?;
        self.meta_optimizer.validate()?;
        self.outer_return.validate()?;
        self.fixed_target.validate()
    }

    /// Per-step inputs of the meta-network implied by this configuration.
    pub fn meta_features(&self) -> Vec<MetaFeature> {
        let mut f = vec![MetaFeature::Reward, MetaFeature::Discount, MetaFeature::NextValue];
        if self.policy_features {
            f.push(MetaFeature::PiProb);
            f.push(MetaFeature::MuProb);
        }
        if self.inner_mode == InnerMode::DirectLoss {
            // a loss has to see the quantities it is meant to move
            f.push(MetaFeature::Value);
            if self.variant == Variant::ActorCritic && !self.policy_features {
                f.push(MetaFeature::PiProb);
            }
        }
        f
    }
}
