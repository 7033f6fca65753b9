//! Deterministic RNG substreams.
//!
//! All randomness flows from one master seed through named substreams keyed
//! by small integer tags (stream kind, entity index, step index). Keying per
//! entity rather than per draw order makes parallel evaluation and agent
//! relabelling reproducible: the same (tag, entity, step) triple always
//! yields the same stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream kinds used across the crate. Values are stable identifiers, not
/// ordinals, so adding streams never reshuffles existing ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    EnvTransition = 1,
    EnvLambda = 2,
    EnvReward = 3,
    DemoTrajectory = 4,
    PolicyInit = 5,
    PolicyNoise = 6,
    RewardInit = 7,
    RewardNoise = 8,
    BetaDraw = 9,
    PolicyPick = 10,
    Proposal = 11,
    Generic = 12,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Mix a master seed with a sequence of tags into a single stream seed.
pub fn mix(master: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(master ^ 0x6d61_6972_6c00_0001);
    for &t in tags {
        state = splitmix64(state ^ splitmix64(t.wrapping_add(0x517c_c1b7_2722_0a95)));
    }
    state
}

/// Derive a ChaCha8 substream for `(stream, tags...)` under `master`.
pub fn substream(master: u64, stream: Stream, tags: &[u64]) -> ChaCha8Rng {
    let mut all = Vec::with_capacity(tags.len() + 1);
    all.push(stream as u64);
    all.extend_from_slice(tags);
    ChaCha8Rng::seed_from_u64(mix(master, &all))
}
