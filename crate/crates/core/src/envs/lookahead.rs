use rand::Rng;

use super::catch::{catch_reset, catch_step, CatchAction, CatchState};
use crate::error::Result;

/// Best total reward reachable from `state` within `depth` moves.
fn best_value(state: CatchState, depth: usize) -> Result<f64> {
    if depth == 0 || state.is_terminal() {
        return Ok(0.0);
    }
    let mut best = f64::NEG_INFINITY;
    for a in CatchAction::ALL {
        best = best.max(action_value(state, a, depth)?);
    }
    Ok(best)
}

fn action_value(state: CatchState, action: CatchAction, depth: usize) -> Result<f64> {
    let (next, reward, done) = catch_step(state, action)?;
    Ok(reward + if done { 0.0 } else { best_value(next, depth - 1)? })
}

/// Exhaustive search over the next `horizon` moves; ties are broken uniformly.
pub fn lookahead_action<R: Rng + ?Sized>(state: &CatchState, horizon: usize, rng: &mut R) -> Result<CatchAction> {
    let values = CatchAction::ALL
        .iter()
        .map(|&a| action_value(*state, a, horizon.max(1)))
        .collect::<Result<Vec<_>>>()?;
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..values.len()).filter(|&i| values[i] == best).collect();
    Ok(CatchAction::ALL[ties[rng.gen_range(0..ties.len())]])
}

/// Mean episode return of the `horizon`-step lookahead player on Catch.
pub fn lookahead_baseline<R: Rng + ?Sized>(rng: &mut R, episodes: usize, horizon: usize) -> Result<f64> {
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut s = catch_reset(rng);
        loop {
            let a = lookahead_action(&s, horizon, rng)?;
            let (next, reward, done) = catch_step(s, a)?;
            s = next;
            if done {
                total += reward;
                break;
            }
        }
    }
    Ok(total / episodes.max(1) as f64)
}

pub fn three_step_lookahead_baseline<R: Rng + ?Sized>(rng: &mut R, episodes: usize) -> Result<f64> {
    lookahead_baseline(rng, episodes, 3)
}
