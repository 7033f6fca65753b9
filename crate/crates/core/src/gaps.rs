//! Suboptimality gap functions and their reward-parameter gradients.
//!
//! Both gaps are zero exactly at the QRE of `(reward, beta)`:
//!
//! - PSG: the largest state-summed KL divergence between any seat's policy
//!   and its soft response.
//! - QIG: the largest state-summed regularised-value improvement any seat
//!   can gain by a unilateral soft best response.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::game::{
    soft_best_response, soft_policy_evaluation, GroupReward, JointPolicy, RewardlessGame,
};
use crate::game::{EvalCache, JointActionTable};
use crate::linalg::{kl_divergence, softmax_rows};
use crate::rewards::{
    compose_effective, compose_vjp, intrinsic_dpsi, lambda_dpsi, materialize, AgentRewardParams,
    AltruismProfile, GroupSpec,
};

/// Which gap function a sampler runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapKind {
    Psg,
    Qig,
}

/// Gap function settings: the kind, the near-optimality concentration `c`
/// multiplying the gap inside posteriors, and best-response solver limits
/// (used by QIG).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapConfig {
    pub kind: GapKind,
    pub concentration: f64,
    pub br_tolerance: f64,
    pub br_max_iters: usize,
}

impl GapConfig {
    pub fn psg(concentration: f64) -> Self {
        Self {
            kind: GapKind::Psg,
            concentration,
            br_tolerance: 1e-10,
            br_max_iters: 200_000,
        }
    }

    pub fn qig(concentration: f64) -> Self {
        Self {
            kind: GapKind::Qig,
            concentration,
            ..Self::psg(concentration)
        }
    }
}

impl Default for GapConfig {
    fn default() -> Self {
        Self::psg(500.0)
    }
}

/// Boltzmann response of one seat to the joint policy: softmax over the
/// opponent-expected Q values of the evaluated joint policy.
pub fn soft_response(
    game: &RewardlessGame,
    reward: &GroupReward,
    joint: &JointPolicy,
    beta: f64,
    agent_seat: usize,
) -> Result<Array2<f64>> {
    let bundle = soft_policy_evaluation(game, reward, joint, beta)?;
    Ok(softmax_rows(&bundle.expected_q[agent_seat].mapv(|q| beta * q)))
}

/// Policy stability gap: `max_i sum_s KL(pi_i(.|s) || sigma_i(.|s))`.
/// Returns `+inf` if a soft response underflows on the support of `pi`.
pub fn psg(
    game: &RewardlessGame,
    reward: &GroupReward,
    joint: &JointPolicy,
    beta: f64,
) -> Result<f64> {
    let cache = EvalCache::new(game, reward, joint, beta)?;
    Ok(psg_from_cache(&cache, joint, beta).0)
}

fn psg_from_cache(cache: &EvalCache, joint: &JointPolicy, beta: f64) -> (f64, Vec<f64>) {
    let mut per_seat = Vec::with_capacity(joint.num_seats());
    for seat in 0..joint.num_seats() {
        let sigma = softmax_rows(&cache.qbar[seat].mapv(|q| beta * q));
        let mut acc = 0.0;
        for s in 0..joint.num_states() {
            acc += kl_divergence(joint.seat(seat).row(s), sigma.row(s));
        }
        per_seat.push(acc);
    }
    (
        per_seat.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        per_seat,
    )
}

/// QRE imitation gap: `max_i sum_s [V_i^BR(s) - V_i^pi(s)]`, always >= 0 up
/// to solver tolerance.
pub fn qig(
    game: &RewardlessGame,
    reward: &GroupReward,
    joint: &JointPolicy,
    beta: f64,
) -> Result<f64> {
    let cfg = GapConfig::qig(1.0);
    let (gap, _, _) = qig_detailed(game, reward, joint, beta, &cfg)?;
    Ok(gap)
}

type QigDetail = (f64, Vec<f64>, Vec<(Array2<f64>, Array1<f64>)>);

fn qig_detailed(
    game: &RewardlessGame,
    reward: &GroupReward,
    joint: &JointPolicy,
    beta: f64,
    cfg: &GapConfig,
) -> Result<QigDetail> {
    let bundle = soft_policy_evaluation(game, reward, joint, beta)?;
    let mut per_seat = Vec::with_capacity(joint.num_seats());
    let mut responses = Vec::with_capacity(joint.num_seats());
    for seat in 0..joint.num_seats() {
        let (br_policy, v_star) = soft_best_response(
            game,
            reward,
            &joint.others(seat),
            seat,
            beta,
            cfg.br_tolerance,
            cfg.br_max_iters,
        )?;
        let gap: f64 = v_star
            .iter()
            .zip(bundle.values[seat].iter())
            .map(|(star, v)| star - v)
            .sum();
        per_seat.push(gap);
        responses.push((br_policy, v_star));
    }
    let max = per_seat.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((max, per_seat, responses))
}

/// Evaluate the configured gap.
pub fn gap_value(
    cfg: &GapConfig,
    game: &RewardlessGame,
    reward: &GroupReward,
    joint: &JointPolicy,
    beta: f64,
) -> Result<f64> {
    match cfg.kind {
        GapKind::Psg => psg(game, reward, joint, beta),
        GapKind::Qig => {
            let (gap, _, _) = qig_detailed(game, reward, joint, beta, cfg)?;
            Ok(gap)
        }
    }
}

/// Gradient of all agents' unconstrained reward parameters; agents outside a
/// group simply keep zero entries.
#[derive(Debug, Clone)]
pub struct RewardGradient {
    pub psi_r: Vec<Array2<f64>>,
    pub psi_lambda: Vec<f64>,
}

impl RewardGradient {
    pub fn zeros(num_agents: usize, num_states: usize, num_actions: usize) -> Self {
        Self {
            psi_r: vec![Array2::zeros((num_states, num_actions)); num_agents],
            psi_lambda: vec![0.0; num_agents],
        }
    }

    pub fn add_assign(&mut self, other: &RewardGradient) {
        for (a, b) in self.psi_r.iter_mut().zip(other.psi_r.iter()) {
            *a += b;
        }
        for (a, b) in self.psi_lambda.iter_mut().zip(other.psi_lambda.iter()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for a in self.psi_r.iter_mut() {
            a.mapv_inplace(|x| x * factor);
        }
        for l in self.psi_lambda.iter_mut() {
            *l *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.psi_r
            .iter()
            .all(|m| m.iter().all(|v| v.is_finite()))
            && self.psi_lambda.iter().all(|v| v.is_finite())
    }
}

/// Optional per-seat state relabelings applied to members' intrinsic tables
/// before composition. Identity when `None`. Symmetric environments (the
/// kitchen) use these so one canonical table serves either seat.
pub type SeatFrames = Vec<Option<Vec<usize>>>;

/// Identity frames for an `n`-seat group.
pub fn identity_frames(n: usize) -> SeatFrames {
    vec![None; n]
}

pub(crate) fn framed_profiles(
    profiles: &[AltruismProfile],
    group: &GroupSpec,
    frames: &[Option<Vec<usize>>],
) -> Vec<AltruismProfile> {
    let mut out = profiles.to_vec();
    for (seat, &agent) in group.members().iter().enumerate() {
        if let Some(frame) = frames.get(seat).and_then(|f| f.as_ref()) {
            let src = &profiles[agent].intrinsic;
            let mut dst = src.clone();
            for (s, &from) in frame.iter().enumerate() {
                dst.row_mut(s).assign(&src.row(from));
            }
            out[agent].intrinsic = dst;
        }
    }
    out
}

fn unframe_intrinsic_grads(
    grads: &mut [Array2<f64>],
    group: &GroupSpec,
    frames: &[Option<Vec<usize>>],
) {
    for (seat, &agent) in group.members().iter().enumerate() {
        if let Some(frame) = frames.get(seat).and_then(|f| f.as_ref()) {
            let framed = grads[agent].clone();
            let mut canonical = Array2::zeros(framed.dim());
            for (s, &from) in frame.iter().enumerate() {
                let mut row = canonical.row_mut(from);
                row += &framed.row(s);
            }
            grads[agent] = canonical;
        }
    }
}

/// Gradient of `c * gap` with respect to every agent's unconstrained
/// parameters.
///
/// PSG differentiates exactly through the evaluation (values are affine in
/// rewards for a fixed policy) and the soft-response softmax. QIG holds the
/// best-response policy fixed and differentiates the two policy evaluations
/// through their discounted occupancies, which is exact at the maximiser.
/// When several seats tie for the max within 1e-10, their gradients are
/// averaged.
pub fn gap_gradient(
    cfg: &GapConfig,
    params: &[AgentRewardParams],
    group: &GroupSpec,
    game: &RewardlessGame,
    joint: &JointPolicy,
    beta: f64,
    frames: &[Option<Vec<usize>>],
) -> Result<(f64, RewardGradient)> {
    let profiles: Vec<AltruismProfile> = params.iter().map(materialize).collect();
    let framed = framed_profiles(&profiles, group, frames);
    let table = game.joint_actions();
    let reward = compose_effective(&framed, group, table)?;
    let (num_states, num_actions) = params[0].psi_r.dim();
    let num_agents = params.len();

    // Per-seat adjoints of the composed reward tensors.
    let (gap, reward_bar) = match cfg.kind {
        GapKind::Psg => psg_reward_adjoints(cfg, game, &reward, joint, beta)?,
        GapKind::Qig => qig_reward_adjoints(cfg, game, &reward, joint, beta)?,
    };

    let mut grad = RewardGradient::zeros(num_agents, num_states, num_actions);
    psi_grad_from_reward_bar(params, group, game.joint_actions(), frames, &reward_bar, &mut grad);
    Ok((gap, grad))
}

/// Chain per-seat adjoints of a group's composed reward tensors back onto
/// every agent's unconstrained parameters (composition, seat frames, and
/// offset sigmoids), accumulating into `grad`.
pub(crate) fn psi_grad_from_reward_bar(
    params: &[AgentRewardParams],
    group: &GroupSpec,
    table: &JointActionTable,
    frames: &[Option<Vec<usize>>],
    reward_bar: &[Array2<f64>],
    grad: &mut RewardGradient,
) {
    let (num_states, num_actions) = params[0].psi_r.dim();
    let num_agents = params.len();
    let profiles: Vec<AltruismProfile> = params.iter().map(materialize).collect();
    let framed = framed_profiles(&profiles, group, frames);
    let mut intrinsic_bar = vec![Array2::<f64>::zeros((num_states, num_actions)); num_agents];
    let mut lambda_bar = vec![0.0; num_agents];
    compose_vjp(
        &framed,
        group,
        table,
        reward_bar,
        &mut intrinsic_bar,
        &mut lambda_bar,
    );
    unframe_intrinsic_grads(&mut intrinsic_bar, group, frames);
    for agent in 0..num_agents {
        grad.psi_r[agent] = &grad.psi_r[agent] + &(&intrinsic_bar[agent] * &intrinsic_dpsi(&params[agent]));
        grad.psi_lambda[agent] += lambda_bar[agent] * lambda_dpsi(&params[agent]);
    }
}

const TIE_TOL: f64 = 1e-10;

fn psg_reward_adjoints(
    cfg: &GapConfig,
    game: &RewardlessGame,
    reward: &GroupReward,
    joint: &JointPolicy,
    beta: f64,
) -> Result<(f64, Vec<Array2<f64>>)> {
    let cache = EvalCache::new(game, reward, joint, beta)?;
    let (gap, per_seat) = psg_from_cache(&cache, joint, beta);
    let tied: Vec<usize> = (0..joint.num_seats())
        .filter(|&i| per_seat[i] >= gap - TIE_TOL)
        .collect();
    let weight = cfg.concentration / tied.len() as f64;

    let mut seeds: Vec<Option<Array2<f64>>> = vec![None; joint.num_seats()];
    for &seat in &tied {
        // d KL(pi || softmax(beta Qbar)) / d Qbar = beta (sigma - pi).
        let sigma = softmax_rows(&cache.qbar[seat].mapv(|q| beta * q));
        let seed = (&sigma - joint.seat(seat)).mapv(|v| weight * beta * v);
        seeds[seat] = Some(seed);
    }
    let adjoint = cache.backward(game, &seeds, false);
    Ok((gap, adjoint.reward_bar))
}

fn qig_reward_adjoints(
    cfg: &GapConfig,
    game: &RewardlessGame,
    reward: &GroupReward,
    joint: &JointPolicy,
    beta: f64,
) -> Result<(f64, Vec<Array2<f64>>)> {
    let (gap, per_seat, responses) = qig_detailed(game, reward, joint, beta, cfg)?;
    let tied: Vec<usize> = (0..joint.num_seats())
        .filter(|&i| per_seat[i] >= gap - TIE_TOL)
        .collect();
    let weight = cfg.concentration / tied.len() as f64;

    let table = game.joint_actions();
    let j_count = table.len();
    let s_count = game.num_states;
    let mut reward_bar = vec![Array2::<f64>::zeros((s_count, j_count)); joint.num_seats()];
    // The evaluated policy's occupancies are shared across seats.
    let pi_cache = EvalCache::new(game, reward, joint, beta)?;
    let ones = Array1::<f64>::ones(s_count);
    let d_pi = pi_cache.lu.solve_transpose(ones.view());
    for &seat in &tied {
        // Envelope treatment: the best response is held fixed; the value sums
        // are then affine in R_i with the occupancy-weighted visit measures as
        // coefficients.
        let deviated = joint.with_seat(seat, responses[seat].0.clone());
        let br_cache = EvalCache::new(game, reward, &deviated, beta)?;
        let d_br = br_cache.lu.solve_transpose(ones.view());
        for s in 0..s_count {
            for j in 0..j_count {
                reward_bar[seat][[s, j]] += weight
                    * (d_br[s] * br_cache.joint_probs[[s, j]]
                        - d_pi[s] * pi_cache.joint_probs[[s, j]]);
            }
        }
    }
    Ok((gap, reward_bar))
}

/// Re-export the joint-action table type for reward-composition callers.
pub use crate::game::JointActionTable as JointActions;
