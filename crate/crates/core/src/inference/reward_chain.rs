//! Reward posterior sampling for PORP: SGLD against resampled policy draws.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::RewardlessGame;
use crate::gaps::{gap_gradient, GapConfig, RewardGradient, SeatFrames};
use crate::rewards::{AgentRewardParams, GroupSpec, ParamBounds, PSI_CLIP};
use crate::rng::{substream, Stream};

use super::policy_chain::PolicyChainSamples;
use super::priors::{log_prior_reward, log_prior_reward_grad, sample_beta, PriorConfig};
use super::sgld::{sgld_step, SgldSchedule, SgldState};
use super::{ChainKeys, RewardChainSamples, RewardDraw};

/// Settings for the PORP reward chain.
#[derive(Debug, Clone)]
pub struct PorpConfig {
    pub gap: GapConfig,
    pub prior: PriorConfig,
    pub schedule: SgldSchedule,
    pub bounds: ParamBounds,
}

/// Draw initial parameters from their prior, one agent at a time.
pub(crate) fn init_params(
    num_agents: usize,
    num_states: usize,
    num_actions: usize,
    bounds: ParamBounds,
    prior: &PriorConfig,
    keys: &ChainKeys,
) -> Vec<AgentRewardParams> {
    (0..num_agents)
        .map(|agent| {
            let mut rng = substream(
                keys.master_seed,
                Stream::RewardInit,
                &[keys.agent_tags[agent]],
            );
            let mut p = AgentRewardParams::zeros(num_states, num_actions, bounds);
            p.psi_r.mapv_inplace(|_| {
                prior.reward_sigma * rng.sample::<f64, _>(rand_distr::StandardNormal)
            });
            // Uniform altruism on its box pulls back to a standard logistic.
            let u: f64 = rng.gen_range(1e-12..1.0 - 1e-12);
            p.psi_lambda = (u / (1.0 - u)).ln();
            p.clip();
            p
        })
        .collect()
}

/// Apply one SGLD step per agent block (parameters are keyed and clipped per
/// agent so relabelling-aware reruns stay bit-identical).
pub(crate) fn update_params(
    params: &mut [AgentRewardParams],
    states: &mut [SgldState],
    grad: &RewardGradient,
    schedule: &SgldSchedule,
    t: usize,
    keys: &ChainKeys,
) -> Result<()> {
    for (agent, p) in params.iter_mut().enumerate() {
        let dim = p.psi_r.len() + 1;
        let mut flat = Vec::with_capacity(dim);
        flat.extend(p.psi_r.iter().cloned());
        flat.push(p.psi_lambda);
        let mut g = Vec::with_capacity(dim);
        g.extend(grad.psi_r[agent].iter().cloned());
        g.push(grad.psi_lambda[agent]);
        let mut rng = substream(
            keys.master_seed,
            Stream::RewardNoise,
            &[keys.agent_tags[agent], t as u64],
        );
        sgld_step(
            &mut flat,
            &mut states[agent],
            &g,
            schedule,
            t,
            &mut rng,
            Some((-PSI_CLIP, PSI_CLIP)),
        )?;
        for (dst, src) in p.psi_r.iter_mut().zip(flat.iter()) {
            *dst = *src;
        }
        p.psi_lambda = flat[dim - 1];
    }
    Ok(())
}

/// Run the PORP reward chain: per step and group, draw one stored policy
/// sample and a fresh entropy parameter, accumulate `-grad(c * gap)` plus the
/// prior gradient, and take a preconditioned Langevin step. Parameters are
/// shared across groups containing the same agent, so each group's term only
/// feeds its members.
pub fn porp_reward_chain(
    game: &RewardlessGame,
    groups: &[GroupSpec],
    seat_frames: &[SeatFrames],
    policy_samples: &[PolicyChainSamples],
    num_agents: usize,
    cfg: &PorpConfig,
    keys: &ChainKeys,
) -> Result<RewardChainSamples> {
    cfg.schedule.validate()?;
    if groups.len() != policy_samples.len() || groups.len() != seat_frames.len() {
        return Err(Error::DimensionMismatch(
            "groups, policy samples, and seat frames must align".into(),
        ));
    }
    for (g, samples) in groups.iter().zip(policy_samples.iter()) {
        if samples.samples.is_empty() {
            return Err(Error::MissingInput(format!(
                "no policy samples for group {:?}",
                g.members()
            )));
        }
    }
    let (num_states, num_actions) = (game.num_states, game.num_actions);
    let mut params = init_params(
        num_agents,
        num_states,
        num_actions,
        cfg.bounds,
        &cfg.prior,
        keys,
    );
    let mut states: Vec<SgldState> = (0..num_agents)
        .map(|_| SgldState::new(num_states * num_actions + 1))
        .collect();

    let mut chain = RewardChainSamples::default();
    for t in 0..cfg.schedule.iterations {
        // Per-group draws are keyed by (group tag, step); evaluation can run
        // in parallel because reduction happens in group order afterwards.
        let picks: Vec<(usize, f64)> = (0..groups.len())
            .map(|g| {
                let gtag = keys.group_tags[g];
                let mut pick_rng = substream(keys.master_seed, Stream::PolicyPick, &[gtag, t as u64]);
                let idx = pick_rng.gen_range(0..policy_samples[g].samples.len());
                let mut beta_rng = substream(keys.master_seed, Stream::BetaDraw, &[gtag, t as u64]);
                let beta = sample_beta(&cfg.prior, &mut beta_rng);
                (idx, beta)
            })
            .collect();
        let per_group: Vec<Result<(f64, RewardGradient)>> = groups
            .par_iter()
            .enumerate()
            .map(|(g, group)| {
                let (idx, beta) = picks[g];
                gap_gradient(
                    &cfg.gap,
                    &params,
                    group,
                    game,
                    &policy_samples[g].samples[idx],
                    beta,
                    &seat_frames[g],
                )
            })
            .collect();

        let mut total = log_prior_reward_grad(&params, &cfg.prior);
        let mut gaps = Vec::with_capacity(groups.len());
        for (g, result) in per_group.into_iter().enumerate() {
            let (gap, mut grad) = result.map_err(|e| Error::ChainAborted {
                step: t,
                reason: format!("group {g}: {e}"),
            })?;
            grad.scale(-1.0);
            total.add_assign(&grad);
            gaps.push(gap);
        }

        if t >= cfg.schedule.warmup && (t - cfg.schedule.warmup) % cfg.schedule.thin == 0 {
            let log_prior = log_prior_reward(&params, &cfg.prior);
            let log_posterior =
                log_prior - cfg.gap.concentration * gaps.iter().sum::<f64>();
            chain.draws.push(RewardDraw {
                step: t,
                params: params.clone(),
                beta_samples: picks.iter().map(|&(_, b)| b).collect(),
                group_diagnostics: gaps.clone(),
                log_prior,
                log_posterior,
            });
        }

        if !total.is_finite() {
            return Err(Error::ChainAborted {
                step: t,
                reason: "non-finite gradient".into(),
            });
        }
        update_params(&mut params, &mut states, &total, &cfg.schedule, t, keys).map_err(|e| {
            Error::ChainAborted {
                step: t,
                reason: e.to_string(),
            }
        })?;
    }
    Ok(chain)
}
