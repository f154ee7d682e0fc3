use crate::autodiff::Tensor;
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepType {
    /// First transition of an episode.
    First,
    Mid,
    /// Transition that ended the episode.
    Last,
}

/// One environment step `(S_t, A_t, R_{t+1}, γ_{t+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    /// Zero when the step ended the episode, otherwise the environment discount.
    pub discount: f64,
    /// `μ(A_t | S_t)` under the policy that chose the action.
    pub behavior_prob: f64,
    pub step_type: StepType,
}

/// `T` consecutive transitions plus the observation that followed the last.
/// Episode boundaries inside the window are marked by zero discounts; the
/// observation after a terminal step is the reset observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    pub final_observation: Vec<f64>,
    /// Undiscounted returns of episodes that finished inside this window.
    pub completed_returns: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.reward).collect()
    }

    pub fn discounts(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.discount).collect()
    }

    pub fn actions(&self) -> Vec<usize> {
        self.transitions.iter().map(|t| t.action).collect()
    }

    pub fn behavior_probs(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.behavior_prob).collect()
    }

    /// `S_0 .. S_T` stacked as `[T + 1, obs_dim]`.
    pub fn observation_tensor<T: Scalar>(&self) -> Result<Tensor<T>> {
        let dim = self.final_observation.len();
        let mut data = Vec::with_capacity((self.len() + 1) * dim);
        for t in &self.transitions {
            data.extend(t.observation.iter().map(|&x| T::lit(x)));
        }
        data.extend(self.final_observation.iter().map(|&x| T::lit(x)));
        Tensor::new(vec![self.len() + 1, dim], data)
    }
}
