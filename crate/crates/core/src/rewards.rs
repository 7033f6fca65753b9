//! Altruism-structured rewards: bounded sigmoid parametrisation and group
//! composition.
//!
//! Each agent carries an intrinsic reward table over its own `(state,
//! action)` pairs plus a scalar altruism level. When a group plays together,
//! agent `i`'s effective reward on a joint action adds its own intrinsic term
//! and the altruism-weighted average of its partners' terms:
//! `R_i(s, a_vec) = r_i(s, a_i) + lambda_i / (n - 1) * sum_{k != i} r_k(s, a_k)`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GroupReward, JointActionTable};
use crate::linalg::sigmoid;

/// Box constraints for intrinsic rewards and altruism levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub r_min: f64,
    pub r_max: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self {
            r_min: 0.0,
            r_max: 1.0,
            lambda_min: -5.0,
            lambda_max: 5.0,
        }
    }
}

/// Unconstrained parameters kept inside [-PSI_CLIP, PSI_CLIP] to avoid
/// sigmoid saturation.
pub const PSI_CLIP: f64 = 9.0;

/// Unconstrained reward parameters for one agent. Materialised values pass
/// through an offset sigmoid onto the configured box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRewardParams {
    /// Intrinsic reward parameters, shape `(num_states, num_actions)`.
    pub psi_r: Array2<f64>,
    pub psi_lambda: f64,
    pub bounds: ParamBounds,
}

impl AgentRewardParams {
    pub fn zeros(num_states: usize, num_actions: usize, bounds: ParamBounds) -> Self {
        Self {
            psi_r: Array2::zeros((num_states, num_actions)),
            psi_lambda: 0.0,
            bounds,
        }
    }

    /// Clamp every parameter into the saturation guard range.
    pub fn clip(&mut self) {
        self.psi_r.mapv_inplace(|x| x.clamp(-PSI_CLIP, PSI_CLIP));
        self.psi_lambda = self.psi_lambda.clamp(-PSI_CLIP, PSI_CLIP);
    }

    /// Inverse of [`materialize`] up to clipping: maps a profile back to
    /// parameters (values at the box edges land on the clip bounds).
    pub fn from_profile(profile: &AltruismProfile, bounds: ParamBounds) -> Self {
        let logit = |x: f64, lo: f64, hi: f64| -> f64 {
            let t = ((x - lo) / (hi - lo)).clamp(1e-12, 1.0 - 1e-12);
            ((t / (1.0 - t)).ln()).clamp(-PSI_CLIP, PSI_CLIP)
        };
        Self {
            psi_r: profile
                .intrinsic
                .mapv(|r| logit(r, bounds.r_min, bounds.r_max)),
            psi_lambda: logit(profile.altruism, bounds.lambda_min, bounds.lambda_max),
            bounds,
        }
    }
}

/// Materialised rewards for one agent: a bounded intrinsic table and a
/// bounded altruism scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltruismProfile {
    /// Intrinsic reward table, shape `(num_states, num_actions)`.
    pub intrinsic: Array2<f64>,
    pub altruism: f64,
}

/// Map unconstrained parameters onto their boxes via offset sigmoids.
pub fn materialize(params: &AgentRewardParams) -> AltruismProfile {
    let b = params.bounds;
    AltruismProfile {
        intrinsic: params
            .psi_r
            .mapv(|psi| sigmoid(psi) * (b.r_max - b.r_min) + b.r_min),
        altruism: sigmoid(params.psi_lambda) * (b.lambda_max - b.lambda_min) + b.lambda_min,
    }
}

/// A group: a sorted set of `n` distinct agent indices that play together.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupSpec {
    members: Vec<usize>,
}

impl GroupSpec {
    pub fn new(mut members: Vec<usize>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidParameter("a group needs at least one member".into()));
        }
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(format!(
                "group members must be distinct, got {members:?}"
            )));
        }
        Ok(Self { members })
    }

    /// Members in sorted order; seat `i` of the group's game belongs to
    /// `members()[i]`.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, agent: usize) -> bool {
        self.members.binary_search(&agent).is_ok()
    }

    /// Seat index of `agent` within this group, if present.
    pub fn seat_of(&self, agent: usize) -> Option<usize> {
        self.members.binary_search(&agent).ok()
    }
}

/// Compose a group's effective rewards from its members' profiles, as dense
/// `(num_states, num_actions^n)` tensors in seat order.
///
/// `profiles` is indexed by agent id. Groups of one are rejected: the
/// partner-average term is undefined without partners.
pub fn compose_group_reward(
    profiles: &[AltruismProfile],
    group: &GroupSpec,
    joint: &JointActionTable,
) -> Result<GroupReward> {
    if group.len() < 2 {
        return Err(Error::InvalidParameter(
            "group composition needs at least two members".into(),
        ));
    }
    compose_effective(profiles, group, joint)
}

/// Composition that also admits singleton groups, where the effective reward
/// is exactly the intrinsic one. Used by inference on single-agent games.
pub(crate) fn compose_effective(
    profiles: &[AltruismProfile],
    group: &GroupSpec,
    joint: &JointActionTable,
) -> Result<GroupReward> {
    let n = group.len();
    for &m in group.members() {
        if m >= profiles.len() {
            return Err(Error::MissingInput(format!(
                "no profile for agent {m} (have {})",
                profiles.len()
            )));
        }
    }
    let (s_count, a_count) = profiles[group.members()[0]].intrinsic.dim();
    for &m in group.members() {
        if profiles[m].intrinsic.dim() != (s_count, a_count) {
            return Err(Error::DimensionMismatch(format!(
                "agent {m} intrinsic table has shape {:?}, expected ({s_count}, {a_count})",
                profiles[m].intrinsic.dim()
            )));
        }
    }
    let j_count = joint.len();
    let mut per_agent = Vec::with_capacity(n);
    for (seat, &agent) in group.members().iter().enumerate() {
        let own = &profiles[agent].intrinsic;
        let lambda = profiles[agent].altruism;
        let mut table = Array2::<f64>::zeros((s_count, j_count));
        for s in 0..s_count {
            for j in 0..j_count {
                let acts = joint.actions(j);
                let mut value = own[[s, acts[seat]]];
                if n > 1 {
                    let mut partners = 0.0;
                    for (k, &other) in group.members().iter().enumerate() {
                        if k != seat {
                            partners += profiles[other].intrinsic[[s, acts[k]]];
                        }
                    }
                    value += lambda / (n as f64 - 1.0) * partners;
                }
                table[[s, j]] = value;
            }
        }
        per_agent.push(table);
    }
    GroupReward::new(per_agent)
}

/// Adjoint of [`compose_group_reward`]: scatter per-seat reward adjoints back
/// onto the members' intrinsic tables and altruism scalars.
pub(crate) fn compose_vjp(
    profiles: &[AltruismProfile],
    group: &GroupSpec,
    joint: &JointActionTable,
    reward_bar: &[Array2<f64>],
    intrinsic_bar: &mut [Array2<f64>],
    lambda_bar: &mut [f64],
) {
    let n = group.len();
    let (s_count, _) = profiles[group.members()[0]].intrinsic.dim();
    let j_count = joint.len();
    for (seat, &agent) in group.members().iter().enumerate() {
        let lambda = profiles[agent].altruism;
        for s in 0..s_count {
            for j in 0..j_count {
                let adj = reward_bar[seat][[s, j]];
                if adj == 0.0 {
                    continue;
                }
                let acts = joint.actions(j);
                intrinsic_bar[agent][[s, acts[seat]]] += adj;
                if n > 1 {
                    let scale = 1.0 / (n as f64 - 1.0);
                    let mut partners = 0.0;
                    for (k, &other) in group.members().iter().enumerate() {
                        if k != seat {
                            intrinsic_bar[other][[s, acts[k]]] += adj * lambda * scale;
                            partners += profiles[other].intrinsic[[s, acts[k]]];
                        }
                    }
                    lambda_bar[agent] += adj * partners * scale;
                }
            }
        }
    }
}

/// Derivative of the materialised intrinsic entry w.r.t. its parameter.
pub(crate) fn intrinsic_dpsi(params: &AgentRewardParams) -> Array2<f64> {
    let range = params.bounds.r_max - params.bounds.r_min;
    params.psi_r.mapv(|psi| {
        let s = sigmoid(psi);
        s * (1.0 - s) * range
    })
}

/// Derivative of the materialised altruism w.r.t. its parameter.
pub(crate) fn lambda_dpsi(params: &AgentRewardParams) -> f64 {
    let range = params.bounds.lambda_max - params.bounds.lambda_min;
    let s = sigmoid(params.psi_lambda);
    s * (1.0 - s) * range
}
