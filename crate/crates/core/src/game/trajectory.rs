//! Trajectory sampling from a joint policy.

use rand::Rng;

use crate::error::{Error, Result};

use super::{JointPolicy, RewardlessGame, Trajectory};

/// Draw an index from a categorical distribution given as a probability
/// slice. Rounding slack is absorbed by the final index.
pub(crate) fn sample_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    probs.len() - 1
}

/// Roll out `length` steps: the start state comes from the game's initial
/// distribution, each seat draws its action independently from its policy,
/// and the next state follows the transition tensor.
///
/// The draw order is fixed (state, then seats in order, then next state), so
/// a given RNG stream reproduces the trajectory bit for bit.
pub fn sample_trajectory<R: Rng>(
    game: &RewardlessGame,
    joint: &JointPolicy,
    length: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    if length == 0 {
        return Err(Error::InvalidParameter("trajectory length must be at least 1".into()));
    }
    if joint.num_seats() != game.num_players
        || joint.num_states() != game.num_states
        || joint.num_actions() != game.num_actions
    {
        return Err(Error::DimensionMismatch(
            "joint policy does not match the game's dimensions".into(),
        ));
    }
    let table = game.joint_actions();
    let mut steps = Vec::with_capacity(length);
    let mut state = sample_index(
        game.initial_dist.as_slice().expect("contiguous"),
        rng,
    );
    for _ in 0..length {
        let mut actions = Vec::with_capacity(game.num_players);
        for seat in 0..game.num_players {
            let row = joint.seat(seat).row(state);
            actions.push(sample_index(row.as_slice().expect("row-major layout"), rng));
        }
        let j = table.index(&actions);
        steps.push((state, actions));
        let row = game.transition.slice(ndarray::s![state, j, ..]);
        state = sample_index(row.as_slice().expect("contiguous"), rng);
    }
    Ok(Trajectory { steps })
}
