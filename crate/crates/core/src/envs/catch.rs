use rand::Rng;

use super::Environment;
use crate::error::{Error, Result};

pub const ROWS: usize = 6;
pub const COLS: usize = 11;
pub const PADDLE_START: usize = COLS / 2;
pub const NUM_ACTIONS: usize = 3;

/// Paddle moves: 0 left, 1 stay, 2 right.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatchAction {
    Left,
    Stay,
    Right,
}

impl CatchAction {
    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(CatchAction::Left),
            1 => Ok(CatchAction::Stay),
            2 => Ok(CatchAction::Right),
            _ => Err(Error::IndexOutOfRange {
                index: i,
                bound: NUM_ACTIONS,
            }),
        }
    }

    pub const ALL: [CatchAction; 3] = [CatchAction::Left, CatchAction::Stay, CatchAction::Right];
}

/// Pellet falls one row per step from the top; the paddle sits on the bottom row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CatchState {
    pub pellet_row: usize,
    pub pellet_col: usize,
    pub paddle_col: usize,
}

impl CatchState {
    pub fn is_terminal(&self) -> bool {
        self.pellet_row == ROWS - 1
    }

    pub fn steps_remaining(&self) -> usize {
        ROWS - 1 - self.pellet_row
    }
}

pub fn catch_reset<R: Rng + ?Sized>(rng: &mut R) -> CatchState {
    CatchState {
        pellet_row: 0,
        pellet_col: rng.gen_range(0..COLS),
        paddle_col: PADDLE_START,
    }
}

/// Returns the next state, the reward and whether the episode ended.
pub fn catch_step(state: CatchState, action: CatchAction) -> Result<(CatchState, f64, bool)> {
    if state.is_terminal() {
        return Err(Error::TerminalState);
    }
    let paddle_col = match action {
        CatchAction::Left => state.paddle_col.saturating_sub(1),
        CatchAction::Stay => state.paddle_col,
        CatchAction::Right => (state.paddle_col + 1).min(COLS - 1),
    };
    let next = CatchState {
        pellet_row: state.pellet_row + 1,
        pellet_col: state.pellet_col,
        paddle_col,
    };
    if next.is_terminal() {
        let reward = if next.paddle_col == next.pellet_col { 1.0 } else { -1.0 };
        Ok((next, reward, true))
    } else {
        Ok((next, 0.0, false))
    }
}

/// Flattened 6x11 grid with ones at the pellet and the paddle.
pub fn catch_observation(state: &CatchState) -> Vec<f64> {
    let mut obs = vec![0.0; ROWS * COLS];
    obs[state.pellet_row * COLS + state.pellet_col] = 1.0;
    obs[(ROWS - 1) * COLS + state.paddle_col] = 1.0;
    obs
}

#[derive(Debug, Clone)]
pub struct Catch {
    state: CatchState,
}

impl Default for Catch {
    fn default() -> Self {
        Self::new()
    }
}

impl Catch {
    pub fn new() -> Self {
        Catch {
            state: CatchState {
                pellet_row: 0,
                pellet_col: PADDLE_START,
                paddle_col: PADDLE_START,
            },
        }
    }

    pub fn state(&self) -> CatchState {
        self.state
    }
}

impl Environment for Catch {
    fn obs_dim(&self) -> usize {
        ROWS * COLS
    }

    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<f64> {
        self.state = catch_reset(rng);
        catch_observation(&self.state)
    }

    fn step<R: Rng + ?Sized>(&mut self, action: usize, _rng: &mut R) -> Result<(Vec<f64>, f64, bool)> {
        let (next, reward, done) = catch_step(self.state, CatchAction::from_index(action)?)?;
        self.state = next;
        Ok((catch_observation(&next), reward, done))
    }
}
