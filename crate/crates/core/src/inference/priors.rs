//! Priors over reward parameters, policy logits, and the entropy parameter.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gaps::RewardGradient;
use crate::linalg::sigmoid;
use crate::rewards::AgentRewardParams;

/// Prior hyperparameters. Intrinsic reward parameters get a zero-mean
/// Gaussian; altruism gets a uniform prior on its materialised support
/// (which, pulled back through the sigmoid, is a standard logistic density on
/// the parameter); the entropy parameter gets an exponential prior truncated
/// below at `beta_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Std-dev of the Gaussian on intrinsic reward parameters.
    pub reward_sigma: f64,
    /// Std-dev of the Gaussian on policy logits; `None` leaves the policy
    /// posterior unregularised.
    pub policy_sigma: Option<f64>,
    /// Rate of the exponential prior on the entropy parameter.
    pub beta_rate: f64,
    /// Lower truncation of the entropy parameter.
    pub beta_min: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            reward_sigma: 1.0 / 6.0,
            policy_sigma: None,
            beta_rate: 10.0,
            beta_min: 0.05,
        }
    }
}

fn log_normal(x: f64, sigma: f64) -> f64 {
    let z = x / sigma;
    -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Log prior density of all agents' reward parameters: Gaussian terms on the
/// intrinsic parameters plus, per agent, the uniform density of the
/// materialised altruism with its change-of-variables Jacobian (together the
/// standard logistic log-density of the altruism parameter).
pub fn log_prior_reward(params: &[AgentRewardParams], cfg: &PriorConfig) -> f64 {
    let mut acc = 0.0;
    for p in params {
        for &psi in p.psi_r.iter() {
            acc += log_normal(psi, cfg.reward_sigma);
        }
        let s = sigmoid(p.psi_lambda);
        acc += s.max(1e-300).ln() + (1.0 - s).max(1e-300).ln();
    }
    acc
}

/// Gradient of [`log_prior_reward`] in every agent's parameters.
pub fn log_prior_reward_grad(params: &[AgentRewardParams], cfg: &PriorConfig) -> RewardGradient {
    let (s_count, a_count) = params[0].psi_r.dim();
    let mut grad = RewardGradient::zeros(params.len(), s_count, a_count);
    let inv_var = 1.0 / (cfg.reward_sigma * cfg.reward_sigma);
    for (agent, p) in params.iter().enumerate() {
        grad.psi_r[agent] = p.psi_r.mapv(|psi| -psi * inv_var);
        grad.psi_lambda[agent] = 1.0 - 2.0 * sigmoid(p.psi_lambda);
    }
    grad
}

/// Draw from the exponential prior conditioned on `beta >= beta_min`. By
/// memorylessness the truncated draw is exactly `beta_min` plus a fresh
/// exponential, so no rejection or clipping is involved.
pub fn sample_beta<R: Rng>(cfg: &PriorConfig, rng: &mut R) -> f64 {
    let u: f64 = rng.gen();
    cfg.beta_min - (1.0 - u).ln() / cfg.beta_rate
}
