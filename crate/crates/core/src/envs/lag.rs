use crate::nn::ParamSet;
use crate::scalar::Scalar;

/// Acts with a copy of the learner's parameters that is refreshed only every
/// `lag` learner updates. A lag of zero always acts with the live parameters.
#[derive(Debug, Clone)]
pub struct LaggedActor<T> {
    lag: usize,
    snapshot: Option<ParamSet<T>>,
    updates_since_refresh: usize,
}

impl<T: Scalar> LaggedActor<T> {
    pub fn new(lag: usize) -> Self {
        LaggedActor {
            lag,
            snapshot: None,
            updates_since_refresh: 0,
        }
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    /// Records one learner update.
    pub fn observe_update(&mut self) {
        self.updates_since_refresh += 1;
    }

    /// Parameters to act with, given the learner's current ones.
    pub fn params<'a>(&'a mut self, learner: &'a ParamSet<T>) -> &'a ParamSet<T> {
        if self.lag == 0 {
            return learner;
        }
        if self.snapshot.is_none() || self.updates_since_refresh >= self.lag {
            self.snapshot = Some(learner.clone());
            self.updates_since_refresh = 0;
        }
        self.snapshot.as_ref().unwrap_or(learner)
    }
}
