//! Return targets, VTrace and the tabular TD(λ) baseline.

pub mod returns;
pub mod td_lambda;


pub use returns::{
    discounted_returns, lambda_return, n_step_return, q_learning_target, vtrace, ReturnKind, ReturnSpec,
    VTraceOutput,
};
pub use td_lambda::{final_window_mean, TabularTdLambda, td_lambda_learner, value_mse, MsePoint, TdLambdaConfig, TdLambdaRun};
