//! Parameter sets and the networks built on the tape: MLP, LSTM cell, the
//! agent network and the meta-network that produces update targets.

mod agent;
pub mod checkpoint;
mod init;
mod lstm;
mod meta;
mod mlp;
mod params;

pub use agent::{AgentNetwork, AgentOutput, Head};
pub use init::{init_params, init_params_with, zero_params, InitKind, ParamShape, ParamSpec};
pub use lstm::{lstm_step, LstmCell};
pub use meta::{meta_forward, MetaFeature, MetaInputs, MetaNetwork};
pub use mlp::{linear, mlp_forward, Mlp};
pub use params::{ParamSet, VarSet};

#[cfg(test)]
mod tests;
