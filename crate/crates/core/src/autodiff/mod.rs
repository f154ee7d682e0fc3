//! Tape-based reverse-mode automatic differentiation with support for
//! differentiating gradients a second time.

mod backward;
pub mod gradcheck;
pub mod kernels;
mod op;
mod tape;
mod tensor;

pub use backward::Gradient;
pub use op::OpKind;
pub use tape::{Op, Tape, Var};
pub use tensor::Tensor;
