use rand::Rng;

use super::Environment;
use crate::error::Result;

pub const NUM_STATES: usize = 5;
pub const START: usize = 3;
/// Environment steps between flips of the left-exit reward.
pub const DEFAULT_SWITCH_PERIOD: usize = 960;

/// Position on the chain A..E (1..=5) plus the reward-phase bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkState {
    pub position: usize,
    /// Steps since the left reward last switched.
    pub phase_clock: usize,
    /// `false`: left exit pays 0; `true`: left exit pays -1.
    pub negative_phase: bool,
}

impl WalkState {
    pub fn start() -> Self {
        WalkState {
            position: START,
            phase_clock: 0,
            negative_phase: false,
        }
    }

    pub fn left_reward(&self) -> f64 {
        if self.negative_phase {
            -1.0
        } else {
            0.0
        }
    }
}

/// One random move. Exiting right pays 1, exiting left pays the current
/// phase's left reward; on exit the position returns to the centre.
/// `switch_period = None` keeps the left reward fixed.
pub fn walk_step<R: Rng + ?Sized>(
    state: WalkState,
    rng: &mut R,
    switch_period: Option<usize>,
) -> (WalkState, f64, bool) {
    let right = rng.gen_bool(0.5);
    let mut next = state;
    let (reward, done) = match (state.position, right) {
        (NUM_STATES, true) => (1.0, true),
        (1, false) => (state.left_reward(), true),
        (p, true) => {
            next.position = p + 1;
            (0.0, false)
        }
        (p, false) => {
            next.position = p - 1;
            (0.0, false)
        }
    };
    if done {
        next.position = START;
    }
    if let Some(period) = switch_period {
        next.phase_clock += 1;
        if next.phase_clock == period {
            next.phase_clock = 0;
            next.negative_phase = !next.negative_phase;
        }
    }
    (next, reward, done)
}

/// Exact undiscounted state values of positions 1..=5 when the left exit
/// pays `left_reward` and the right exit pays 1.
pub fn walk_true_values(left_reward: f64) -> [f64; NUM_STATES] {
    // v(i) solves v(i) = (v(i-1) + v(i+1)) / 2 with v(0) = left, v(6) = 1,
    // i.e. linear interpolation between the two boundary rewards.
    let mut v = [0.0; NUM_STATES];
    for (i, slot) in v.iter_mut().enumerate() {
        let x = (i + 1) as f64 / (NUM_STATES + 1) as f64;
        *slot = left_reward + (1.0 - left_reward) * x;
    }
    v
}

pub fn one_hot(position: usize) -> Vec<f64> {
    let mut o = vec![0.0; NUM_STATES];
    o[position - 1] = 1.0;
    o
}

#[derive(Debug, Clone)]
pub struct RandomWalk {
    state: WalkState,
    switch_period: Option<usize>,
}

impl RandomWalk {
    pub fn new(switch_period: Option<usize>) -> Self {
        RandomWalk {
            state: WalkState::start(),
            switch_period,
        }
    }

    pub fn state(&self) -> WalkState {
        self.state
    }

    pub fn true_values(&self) -> [f64; NUM_STATES] {
        walk_true_values(self.state.left_reward())
    }
}

impl Environment for RandomWalk {
    fn obs_dim(&self) -> usize {
        NUM_STATES
    }

    fn num_actions(&self) -> usize {
        1
    }

    fn reset<R: Rng + ?Sized>(&mut self, _rng: &mut R) -> Vec<f64> {
        self.state.position = START;
        one_hot(START)
    }

    fn step<R: Rng + ?Sized>(&mut self, _action: usize, rng: &mut R) -> Result<(Vec<f64>, f64, bool)> {
        let (next, reward, done) = walk_step(self.state, rng, self.switch_period);
        self.state = next;
        Ok((one_hot(next.position), reward, done))
    }
}
