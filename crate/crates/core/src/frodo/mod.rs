//! Online discovery of update targets: inner updates driven by a learned
//! target, outer updates of the target network through them.

pub mod config;
pub mod learner;
pub mod losses;

#[cfg(test)]
mod tests;

pub use config::{FrodoConfig, InnerMode, Variant};
pub use learner::{FixedTrajectories, Frodo, Frozen, MetaUpdateReport, Role, TrajectorySource, Unrolled};
pub use losses::{
    consistency_loss, consistency_loss_against, consistency_targets, inner_loss, inner_loss_with, outer_loss, outer_loss_with,
    target_divergence, InnerLoss, OuterConstants, OuterLoss,
};
