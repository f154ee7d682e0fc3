//! Online discovery of reinforcement-learning update targets by meta-gradient
//! descent, together with the autodiff engine, environments, classic return
//! estimators and optimizers it is built from.
//!
//! Numeric code is generic over [`Scalar`]; the `*64` and `*32` aliases below
//! fix the element type.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod envs;
pub mod frodo;
pub mod nn;
pub mod optim;
pub mod rl;
pub mod error;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor64 = autodiff::Tensor<f64>;
pub type Tensor32 = autodiff::Tensor<f32>;
pub type Tape64 = autodiff::Tape<f64>;
pub type Tape32 = autodiff::Tape<f32>;
pub type ParamSet64 = nn::ParamSet<f64>;
pub type ParamSet32 = nn::ParamSet<f32>;
pub type Frodo64 = frodo::Frodo<f64>;
pub type Frodo32 = frodo::Frodo<f32>;
