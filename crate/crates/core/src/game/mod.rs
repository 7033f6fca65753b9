//! Rewardless Markov games: representation, entropy-regularised evaluation,
//! soft best responses, QRE solving, and trajectory sampling.
//!
//! Joint actions are flattened lexicographically with seat 0 slowest-varying:
//! the tuple `(a_0, ..., a_{n-1})` maps to `a_0 * A^{n-1} + ... + a_{n-1}`.

mod best_response;
mod eval;
mod qre;
mod trajectory;

pub use best_response::{soft_best_response, BR_MAX_ITERS, BR_TOL};
pub use eval::{induced_transition, soft_policy_evaluation};
pub(crate) use eval::EvalCache;
pub use qre::{solve_qre, solve_qre_from, QreConfig, QreSolution};
pub use trajectory::sample_trajectory;

use ndarray::{Array1, Array2, Array3};

use crate::error::{Error, Result};

/// Tolerance for probability rows summing to one.
pub const PROB_TOL: f64 = 1e-12;

/// Lexicographic enumeration of joint actions for `n` players sharing one
/// action set of size `a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointActionTable {
    num_players: usize,
    num_actions: usize,
    flat: Vec<usize>,
}

impl JointActionTable {
    pub fn new(num_players: usize, num_actions: usize) -> Self {
        let count = num_actions
            .checked_pow(num_players as u32)
            .expect("joint action space overflows usize");
        let mut flat = Vec::with_capacity(count * num_players);
        for j in 0..count {
            let mut rem = j;
            let mut tuple = vec![0usize; num_players];
            for seat in (0..num_players).rev() {
                tuple[seat] = rem % num_actions;
                rem /= num_actions;
            }
            flat.extend_from_slice(&tuple);
        }
        Self {
            num_players,
            num_actions,
            flat,
        }
    }

    /// Number of joint actions, `A^n`.
    pub fn len(&self) -> usize {
        self.flat.len() / self.num_players.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Action tuple for flattened index `j`.
    pub fn actions(&self, j: usize) -> &[usize] {
        &self.flat[j * self.num_players..(j + 1) * self.num_players]
    }

    /// Flattened index of an action tuple.
    pub fn index(&self, actions: &[usize]) -> usize {
        debug_assert_eq!(actions.len(), self.num_players);
        actions.iter().fold(0, |acc, &a| acc * self.num_actions + a)
    }
}

/// A rewardless Markov game: dynamics without any reward attached.
#[derive(Debug, Clone)]
pub struct RewardlessGame {
    pub num_states: usize,
    pub num_actions: usize,
    pub num_players: usize,
    /// Transition tensor indexed `(state, joint action, next state)`.
    pub transition: Array3<f64>,
    pub discount: f64,
    pub initial_dist: Array1<f64>,
    joint: JointActionTable,
}

impl RewardlessGame {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        num_players: usize,
        transition: Array3<f64>,
        discount: f64,
        initial_dist: Array1<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || num_players == 0 {
            return Err(Error::InvalidParameter(
                "state, action, and player counts must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidParameter(format!(
                "discount must lie in [0, 1), got {discount}"
            )));
        }
        let joint = JointActionTable::new(num_players, num_actions);
        let expected = (num_states, joint.len(), num_states);
        if transition.dim() != expected {
            return Err(Error::DimensionMismatch(format!(
                "transition tensor has shape {:?}, expected {:?}",
                transition.dim(),
                expected
            )));
        }
        for s in 0..num_states {
            for j in 0..joint.len() {
                let row = transition.slice(ndarray::s![s, j, ..]);
                validate_distribution(row.as_slice().expect("contiguous row"), &format!(
                    "transition row (state {s}, joint action {j})"
                ))?;
            }
        }
        if initial_dist.len() != num_states {
            return Err(Error::DimensionMismatch(format!(
                "initial distribution has length {}, expected {num_states}",
                initial_dist.len()
            )));
        }
        validate_distribution(
            initial_dist.as_slice().expect("contiguous"),
            "initial distribution",
        )?;
        Ok(Self {
            num_states,
            num_actions,
            num_players,
            transition,
            discount,
            initial_dist,
            joint,
        })
    }

    /// Joint-action enumeration for this game.
    pub fn joint_actions(&self) -> &JointActionTable {
        &self.joint
    }

    pub fn num_joint_actions(&self) -> usize {
        self.joint.len()
    }
}

fn validate_distribution(row: &[f64], what: &str) -> Result<()> {
    let mut sum = 0.0;
    for &p in row {
        if !(p >= 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "{what} contains a negative or non-finite entry ({p})"
            )));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidDistribution(format!(
            "{what} sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Per-seat stochastic policies for a fixed group playing an `n`-player game.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPolicy {
    seats: Vec<Array2<f64>>,
}

impl JointPolicy {
    pub fn new(seats: Vec<Array2<f64>>) -> Result<Self> {
        if seats.is_empty() {
            return Err(Error::InvalidParameter("a joint policy needs at least one seat".into()));
        }
        let shape = seats[0].dim();
        for (i, m) in seats.iter().enumerate() {
            if m.dim() != shape {
                return Err(Error::DimensionMismatch(format!(
                    "seat {i} policy has shape {:?}, expected {:?}",
                    m.dim(),
                    shape
                )));
            }
            for (s, row) in m.rows().into_iter().enumerate() {
                validate_distribution(
                    row.as_slice().expect("contiguous row"),
                    &format!("policy row (seat {i}, state {s})"),
                )?;
            }
        }
        Ok(Self { seats })
    }

    /// Uniform joint policy matching a game's dimensions.
    pub fn uniform(game: &RewardlessGame) -> Self {
        let row = 1.0 / game.num_actions as f64;
        let m = Array2::from_elem((game.num_states, game.num_actions), row);
        Self {
            seats: vec![m; game.num_players],
        }
    }

    pub fn num_seats(&self) -> usize {
        self.seats.len()
    }

    pub fn num_states(&self) -> usize {
        self.seats[0].nrows()
    }

    pub fn num_actions(&self) -> usize {
        self.seats[0].ncols()
    }

    pub fn seat(&self, i: usize) -> &Array2<f64> {
        &self.seats[i]
    }

    pub fn seats(&self) -> &[Array2<f64>] {
        &self.seats
    }

    /// Policies of every seat except `seat`, in seat order.
    pub fn others(&self, seat: usize) -> Vec<Array2<f64>> {
        self.seats
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != seat)
            .map(|(_, m)| m.clone())
            .collect()
    }

    /// Replace one seat's policy, keeping the rest.
    pub fn with_seat(&self, seat: usize, policy: Array2<f64>) -> Self {
        let mut seats = self.seats.clone();
        seats[seat] = policy;
        Self { seats }
    }

    /// Probability of the joint action tuple `actions` in state `s`.
    pub fn joint_prob(&self, s: usize, actions: &[usize]) -> f64 {
        self.seats
            .iter()
            .zip(actions.iter())
            .map(|(m, &a)| m[[s, a]])
            .product()
    }

    /// Maximum per-state total-variation distance to another joint policy.
    pub fn total_variation(&self, other: &JointPolicy) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, b) in self.seats.iter().zip(other.seats.iter()) {
            for (ra, rb) in a.rows().into_iter().zip(b.rows()) {
                let tv = 0.5
                    * ra.iter()
                        .zip(rb.iter())
                        .map(|(x, y)| (x - y).abs())
                        .sum::<f64>();
                worst = worst.max(tv);
            }
        }
        worst
    }
}

/// Effective rewards of every seat in a group, on joint actions.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupReward {
    per_agent: Vec<Array2<f64>>,
}

impl GroupReward {
    pub fn new(per_agent: Vec<Array2<f64>>) -> Result<Self> {
        if per_agent.is_empty() {
            return Err(Error::InvalidParameter("group reward needs at least one seat".into()));
        }
        let shape = per_agent[0].dim();
        for (i, t) in per_agent.iter().enumerate() {
            if t.dim() != shape {
                return Err(Error::DimensionMismatch(format!(
                    "seat {i} reward has shape {:?}, expected {:?}",
                    t.dim(),
                    shape
                )));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "seat {i} reward contains a non-finite entry"
                )));
            }
        }
        Ok(Self { per_agent })
    }

    pub fn num_seats(&self) -> usize {
        self.per_agent.len()
    }

    pub fn seat(&self, i: usize) -> &Array2<f64> {
        &self.per_agent[i]
    }

    pub fn seats(&self) -> &[Array2<f64>] {
        &self.per_agent
    }
}

/// Entropy-regularised evaluation of a joint policy: per-seat values,
/// joint-action Q tensors, and opponent-expected Q matrices.
#[derive(Debug, Clone)]
pub struct ValueBundle {
    /// `V_i(s)` per seat.
    pub values: Vec<Array1<f64>>,
    /// `Q_i(s, joint action)` per seat.
    pub q_values: Vec<Array2<f64>>,
    /// `Qbar_i(s, own action)` per seat, expected over the others' policies.
    pub expected_q: Vec<Array2<f64>>,
    /// Entropy coefficient the bundle was computed at.
    pub beta: f64,
}

/// A sampled play record: ordered `(state, joint action)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Trajectory {
    pub steps: Vec<(usize, Vec<usize>)>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}
