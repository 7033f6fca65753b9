//! Bayesian posterior sampling over reward parameters and policies.
//!
//! Two samplers target the reward posterior with preconditioned SGLD:
//!
//! - DRP evaluates how likely the demonstrations are under the QRE policies
//!   of the current rewards, differentiating through a truncated, warm-started
//!   equilibrium unroll.
//! - PORP first draws joint policies from a per-group policy posterior, then
//!   weights rewards by `exp(-c * gap)` against uniformly resampled policy
//!   draws.
//!
//! The entropy parameter is resampled from its (truncated exponential) prior
//! at every step, matching the algorithmic treatment of the beta integral as
//! a stochastic-gradient variable.

mod drp;
mod policy_chain;
mod priors;
mod reward_chain;
mod sgld;

pub use drp::{drp_chain, DrpConfig};
pub use policy_chain::{policy_posterior_chain, PolicyChainSamples};
pub use priors::{log_prior_reward, log_prior_reward_grad, sample_beta, PriorConfig};
pub use reward_chain::{porp_reward_chain, PorpConfig};
pub use sgld::{sgld_step, sgld_step_scaled_noise, SgldSchedule, SgldState};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{JointPolicy, Trajectory};
use crate::rewards::{materialize, AgentRewardParams, AltruismProfile, GroupSpec};

/// Demonstrations for one group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupDemos {
    pub group: GroupSpec,
    pub trajectories: Vec<Trajectory>,
}

/// Demonstrations across all observed groups.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct DemonstrationSet {
    pub groups: Vec<GroupDemos>,
}

impl DemonstrationSet {
    pub fn total_steps(&self) -> usize {
        self.groups
            .iter()
            .flat_map(|g| g.trajectories.iter())
            .map(|t| t.len())
            .sum()
    }
}

/// Per-seat action counts and shared state visit counts of a group's
/// demonstrations.
pub fn action_counts(
    demos: &GroupDemos,
    num_states: usize,
    num_actions: usize,
) -> (Vec<Array2<f64>>, Array1<f64>) {
    let n = demos.group.len();
    let mut counts = vec![Array2::<f64>::zeros((num_states, num_actions)); n];
    let mut visits = Array1::<f64>::zeros(num_states);
    for traj in &demos.trajectories {
        for (s, actions) in &traj.steps {
            visits[*s] += 1.0;
            for (seat, &a) in actions.iter().enumerate() {
                counts[seat][[*s, a]] += 1.0;
            }
        }
    }
    (counts, visits)
}

/// Log-likelihood of a group's demonstrations under a joint policy: the sum
/// of per-seat log policy factors (actions are conditionally independent).
pub fn demo_log_likelihood(policy: &JointPolicy, demos: &GroupDemos) -> f64 {
    let mut acc = 0.0;
    for traj in &demos.trajectories {
        for (s, actions) in &traj.steps {
            for (seat, &a) in actions.iter().enumerate() {
                acc += policy.seat(seat)[[*s, a]].max(1e-300).ln();
            }
        }
    }
    acc
}

/// Named RNG streams for one chain: a master seed plus stable per-agent and
/// per-group tags. Relabelling agents while permuting the tags accordingly
/// reproduces chains bit for bit.
#[derive(Debug, Clone)]
pub struct ChainKeys {
    pub master_seed: u64,
    pub agent_tags: Vec<u64>,
    pub group_tags: Vec<u64>,
}

impl ChainKeys {
    pub fn new(master_seed: u64, num_agents: usize, num_groups: usize) -> Self {
        Self {
            master_seed,
            agent_tags: (0..num_agents as u64).collect(),
            group_tags: (0..num_groups as u64).collect(),
        }
    }
}

/// One retained posterior draw with its step diagnostics.
#[derive(Debug, Clone)]
pub struct RewardDraw {
    pub step: usize,
    pub params: Vec<AgentRewardParams>,
    /// Entropy parameter drawn for each group at this step.
    pub beta_samples: Vec<f64>,
    /// Per-group gap value (PORP) or demonstration log-likelihood (DRP).
    pub group_diagnostics: Vec<f64>,
    pub log_prior: f64,
    /// Unnormalised log posterior under this step's stochastic draws.
    pub log_posterior: f64,
}

/// Ordered post-warmup draws of every agent's reward parameters.
#[derive(Debug, Clone, Default)]
pub struct RewardChainSamples {
    pub draws: Vec<RewardDraw>,
}

/// Which chain summary the point estimate materialises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointEstimate {
    /// Chain mean of the unconstrained parameters.
    Mean,
    /// Draw with the highest recorded unnormalised log posterior.
    Map,
}

/// Summarise a chain into per-agent parameters.
pub fn point_estimate_params(
    chain: &RewardChainSamples,
    kind: PointEstimate,
) -> Result<Vec<AgentRewardParams>> {
    let first = chain
        .draws
        .first()
        .ok_or_else(|| Error::MissingInput("empty reward chain".into()))?;
    match kind {
        PointEstimate::Map => {
            let best = chain
                .draws
                .iter()
                .max_by(|a, b| {
                    a.log_posterior
                        .partial_cmp(&b.log_posterior)
                        .expect("finite log posteriors")
                })
                .expect("nonempty chain");
            Ok(best.params.clone())
        }
        PointEstimate::Mean => {
            let mut mean = first.params.clone();
            for p in mean.iter_mut() {
                p.psi_r.fill(0.0);
                p.psi_lambda = 0.0;
            }
            let scale = 1.0 / chain.draws.len() as f64;
            for draw in &chain.draws {
                for (m, p) in mean.iter_mut().zip(draw.params.iter()) {
                    m.psi_r.scaled_add(scale, &p.psi_r);
                    m.psi_lambda += scale * p.psi_lambda;
                }
            }
            Ok(mean)
        }
    }
}

/// Materialised profiles of the chain summary; this is what evaluation
/// metrics consume.
pub fn posterior_point_estimate(
    chain: &RewardChainSamples,
    kind: PointEstimate,
) -> Result<Vec<AltruismProfile>> {
    Ok(point_estimate_params(chain, kind)?
        .iter()
        .map(materialize)
        .collect())
}
