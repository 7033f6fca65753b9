//! Identifiability diagnostics, partition-constant estimation, evaluation
//! metrics, and altruism-imitation synthesis.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::game::{induced_transition, solve_qre, JointPolicy, QreConfig, RewardlessGame};
use crate::gaps::{gap_value, GapConfig, SeatFrames};
use crate::linalg::kl_divergence;
use crate::rewards::{compose_effective, AltruismProfile, GroupSpec, ParamBounds};

/// Outcome of the two-group identifiability rank check for one agent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankReport {
    pub agent: usize,
    pub groups: (Vec<usize>, Vec<usize>),
    pub stacked_rank: usize,
    /// `2 |S| - 1`.
    pub required: usize,
    pub satisfied: bool,
    /// Singular values in descending order, for margin inspection.
    pub singular_values: Vec<f64>,
}

/// Check the rank condition for one agent observed in two groups: stack the
/// blocks `(I - gamma T_a^{g,-i} | I - gamma T_a^{g',-i})` over all own
/// actions and compare the numerical rank against `2 |S| - 1`.
///
/// The agent may occupy different seats in the two groups, so each opponent
/// set comes with the agent's seat there. Rank uses the standard
/// singular-value cutoff `max_dim * machine_eps * sigma_max`.
pub fn check_rank_condition(
    game: &RewardlessGame,
    others_first: (&[Array2<f64>], usize),
    others_second: (&[Array2<f64>], usize),
    gamma: f64,
) -> Result<RankReport> {
    let first = induced_transition(game, others_first.0, others_first.1)?;
    let second = induced_transition(game, others_second.0, others_second.1)?;
    let s_count = game.num_states;
    let a_count = game.num_actions;
    let mut stacked = nalgebra::DMatrix::<f64>::zeros(s_count * a_count, 2 * s_count);
    for a in 0..a_count {
        for s in 0..s_count {
            for sp in 0..s_count {
                let eye = if s == sp { 1.0 } else { 0.0 };
                stacked[(a * s_count + s, sp)] = eye - gamma * first[a][[s, sp]];
                stacked[(a * s_count + s, s_count + sp)] = eye - gamma * second[a][[s, sp]];
            }
        }
    }
    let svd = stacked.svd(false, false);
    let mut singular_values: Vec<f64> = svd.singular_values.iter().cloned().collect();
    singular_values.sort_by(|x, y| y.partial_cmp(x).expect("finite singular values"));
    let sigma_max = singular_values.first().cloned().unwrap_or(0.0);
    let tol = (s_count * a_count).max(2 * s_count) as f64 * f64::EPSILON * sigma_max;
    let stacked_rank = singular_values.iter().filter(|&&v| v > tol).count();
    let required = 2 * s_count - 1;
    Ok(RankReport {
        agent: others_first.1,
        groups: (vec![], vec![]),
        stacked_rank,
        required,
        satisfied: stacked_rank == required,
        singular_values,
    })
}

fn truncated_normal_sample<R: Rng>(
    mean: f64,
    sigma: f64,
    lo: f64,
    hi: f64,
    normal: &Normal,
    rng: &mut R,
) -> f64 {
    let alpha = normal.cdf((lo - mean) / sigma);
    let beta = normal.cdf((hi - mean) / sigma);
    let u: f64 = rng.gen();
    let p = (alpha + u * (beta - alpha)).clamp(1e-15, 1.0 - 1e-15);
    (mean + sigma * normal.inverse_cdf(p)).clamp(lo, hi)
}

fn truncated_normal_log_pdf(x: f64, mean: f64, sigma: f64, lo: f64, hi: f64, normal: &Normal) -> f64 {
    let z = (x - mean) / sigma;
    let log_phi = -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln() - sigma.ln();
    let mass = normal.cdf((hi - mean) / sigma) - normal.cdf((lo - mean) / sigma);
    log_phi - mass.max(1e-300).ln()
}

/// Importance-sampling estimate of the partition constant
/// `Z_pi = integral over the parameter box of exp(-c * gap(pi))`.
///
/// Proposals are per-coordinate truncated normals centred at the ground
/// truth with the given variance. The weights are self-normalised, so with
/// `c = 0` the estimator returns the box volume exactly.
#[allow(clippy::too_many_arguments)]
pub fn estimate_partition<R: Rng>(
    game: &RewardlessGame,
    truth: &[AltruismProfile],
    group: &GroupSpec,
    policy: &JointPolicy,
    gap_cfg: &GapConfig,
    beta: f64,
    bounds: ParamBounds,
    n_samples: usize,
    proposal_variance: f64,
    rng: &mut R,
) -> Result<f64> {
    let sigma = proposal_variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let (s_count, a_count) = truth[group.members()[0]].intrinsic.dim();
    let n = group.len();
    let dim_r = n * s_count * a_count;
    let log_volume = dim_r as f64 * (bounds.r_max - bounds.r_min).ln()
        + n as f64 * (bounds.lambda_max - bounds.lambda_min).ln();

    let mut log_weights = Vec::with_capacity(n_samples);
    let mut log_terms = Vec::with_capacity(n_samples);
    let mut profiles = truth.to_vec();
    for _ in 0..n_samples {
        let mut log_q = 0.0;
        for &agent in group.members() {
            let mean_profile = &truth[agent];
            let mut intrinsic = Array2::<f64>::zeros((s_count, a_count));
            for s in 0..s_count {
                for a in 0..a_count {
                    let mean = mean_profile.intrinsic[[s, a]];
                    let x = truncated_normal_sample(
                        mean,
                        sigma,
                        bounds.r_min,
                        bounds.r_max,
                        &normal,
                        rng,
                    );
                    log_q +=
                        truncated_normal_log_pdf(x, mean, sigma, bounds.r_min, bounds.r_max, &normal);
                    intrinsic[[s, a]] = x;
                }
            }
            let lambda = truncated_normal_sample(
                mean_profile.altruism,
                sigma,
                bounds.lambda_min,
                bounds.lambda_max,
                &normal,
                rng,
            );
            log_q += truncated_normal_log_pdf(
                lambda,
                mean_profile.altruism,
                sigma,
                bounds.lambda_min,
                bounds.lambda_max,
                &normal,
            );
            profiles[agent] = AltruismProfile { intrinsic, altruism: lambda };
        }
        let reward = compose_effective(&profiles, group, game.joint_actions())?;
        let gap = gap_value(gap_cfg, game, &reward, policy, beta)?;
        let log_w = -log_q;
        log_weights.push(log_w);
        log_terms.push(log_w - gap_cfg.concentration * gap);
    }
    let lse = crate::linalg::log_sum_exp(&log_terms) - crate::linalg::log_sum_exp(&log_weights);
    Ok((log_volume + lse).exp())
}

/// Rescaled squared errors: raw MSE divided by the expected squared error of
/// guessing uniformly at random over the parameter range, so 1 means
/// uninformed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorReport {
    pub lambda_per_agent: Vec<f64>,
    pub lambda_mse_rescaled: f64,
    pub reward_raw_per_agent: Vec<f64>,
    pub reward_mse_rescaled_raw: f64,
    pub reward_shift_per_agent: Vec<f64>,
    pub reward_mse_rescaled_shift: f64,
    pub baseline_definition: String,
}

/// Rescaled altruism error: `mean_i (est_i - truth_i)^2` over
/// `mean_i E_U[(U - truth_i)^2]` with `U` uniform on the bounds. Returns the
/// per-agent ratios plus the ratio of means.
pub fn lambda_error(
    estimate: &[f64],
    truth: &[f64],
    bounds: (f64, f64),
) -> Result<(Vec<f64>, f64)> {
    if estimate.len() != truth.len() || estimate.is_empty() {
        return Err(Error::DimensionMismatch(
            "lambda estimate/truth lengths differ or are empty".into(),
        ));
    }
    let (a, b) = bounds;
    let width_term = (b - a) * (b - a) / 12.0;
    let mid = 0.5 * (a + b);
    let mut num = 0.0;
    let mut den = 0.0;
    let mut per_agent = Vec::with_capacity(truth.len());
    for (&e, &t) in estimate.iter().zip(truth.iter()) {
        let sq = (e - t) * (e - t);
        let base = width_term + (mid - t) * (mid - t);
        per_agent.push(sq / base);
        num += sq;
        den += base;
    }
    Ok((per_agent, num / den))
}

/// Alignment applied before the reward error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardAlign {
    Raw,
    /// Add the per-agent constant `mean(truth - estimate)` to the estimate
    /// first; rewards are identifiable only up to constants.
    MeanShift,
}

/// Rescaled intrinsic-reward error over all agents' tables.
pub fn reward_error(
    estimate: &[Array2<f64>],
    truth: &[Array2<f64>],
    bounds: (f64, f64),
    align: RewardAlign,
) -> Result<(Vec<f64>, f64)> {
    if estimate.len() != truth.len() || estimate.is_empty() {
        return Err(Error::DimensionMismatch(
            "reward estimate/truth lengths differ or are empty".into(),
        ));
    }
    let (lo, hi) = bounds;
    let width_term = (hi - lo) * (hi - lo) / 12.0;
    let mid = 0.5 * (lo + hi);
    let mut num_all = 0.0;
    let mut den_all = 0.0;
    let mut per_agent = Vec::with_capacity(truth.len());
    for (est, tru) in estimate.iter().zip(truth.iter()) {
        if est.dim() != tru.dim() {
            return Err(Error::DimensionMismatch(
                "reward table shapes differ".into(),
            ));
        }
        let shift = match align {
            RewardAlign::Raw => 0.0,
            RewardAlign::MeanShift => {
                (tru.iter().sum::<f64>() - est.iter().sum::<f64>()) / est.len() as f64
            }
        };
        let mut num = 0.0;
        let mut den = 0.0;
        for (&e, &t) in est.iter().zip(tru.iter()) {
            let d = e + shift - t;
            num += d * d;
            den += width_term + (mid - t) * (mid - t);
        }
        per_agent.push(num / den);
        num_all += num;
        den_all += den;
    }
    Ok((per_agent, num_all / den_all))
}

/// Assemble the full evaluation report for estimated profiles against the
/// ground truth.
pub fn evaluate_profiles(
    estimate: &[AltruismProfile],
    truth: &[AltruismProfile],
    bounds: ParamBounds,
) -> Result<ErrorReport> {
    let est_lambda: Vec<f64> = estimate.iter().map(|p| p.altruism).collect();
    let tru_lambda: Vec<f64> = truth.iter().map(|p| p.altruism).collect();
    let (lambda_per_agent, lambda_mse) = lambda_error(
        &est_lambda,
        &tru_lambda,
        (bounds.lambda_min, bounds.lambda_max),
    )?;
    let est_r: Vec<Array2<f64>> = estimate.iter().map(|p| p.intrinsic.clone()).collect();
    let tru_r: Vec<Array2<f64>> = truth.iter().map(|p| p.intrinsic.clone()).collect();
    let (raw_per_agent, raw) =
        reward_error(&est_r, &tru_r, (bounds.r_min, bounds.r_max), RewardAlign::Raw)?;
    let (shift_per_agent, shift) = reward_error(
        &est_r,
        &tru_r,
        (bounds.r_min, bounds.r_max),
        RewardAlign::MeanShift,
    )?;
    Ok(ErrorReport {
        lambda_per_agent,
        lambda_mse_rescaled: lambda_mse,
        reward_raw_per_agent: raw_per_agent,
        reward_mse_rescaled_raw: raw,
        reward_shift_per_agent: shift_per_agent,
        reward_mse_rescaled_shift: shift,
        baseline_definition:
            "mean squared error divided by E[(U - truth)^2], U uniform on the parameter range"
                .to_string(),
    })
}

/// Mean KL divergence from the oracle policy, `KL(oracle || candidate)`,
/// uniformly weighted over states. Support violations surface as `+inf`.
pub fn policy_kl_matrix(oracle: &Array2<f64>, candidate: &Array2<f64>) -> Result<f64> {
    if oracle.dim() != candidate.dim() {
        return Err(Error::DimensionMismatch("policy shapes differ".into()));
    }
    let mut acc = 0.0;
    for (o, c) in oracle.rows().into_iter().zip(candidate.rows()) {
        acc += kl_divergence(o, c);
    }
    Ok(acc / oracle.nrows() as f64)
}

/// Mean KL over seats, then states, for joint policies.
pub fn policy_kl(oracle: &JointPolicy, candidate: &JointPolicy) -> Result<f64> {
    if oracle.num_seats() != candidate.num_seats() {
        return Err(Error::DimensionMismatch("seat counts differ".into()));
    }
    let mut acc = 0.0;
    for seat in 0..oracle.num_seats() {
        acc += policy_kl_matrix(oracle.seat(seat), candidate.seat(seat))?;
    }
    Ok(acc / oracle.num_seats() as f64)
}

/// Synthesised partner behaviour at a target altruism level.
#[derive(Debug, Clone)]
pub struct SynthesisOutcome {
    pub joint: JointPolicy,
    /// The chef's regularised value expected under the initial distribution.
    pub chef_value: f64,
    pub residual: f64,
}

/// Replace one member of a two-player group by a partner that combines that
/// member's (inferred) intrinsic reward with a tunable altruism level toward
/// the remaining chef, while the chef optimises its own true intrinsic
/// reward egoistically. Returns the resulting equilibrium and the chef's
/// value.
///
/// `frames` hold the per-seat state relabelings (identity for plain games).
#[allow(clippy::too_many_arguments)]
pub fn synthesize_partner(
    game: &RewardlessGame,
    inferred: &[AltruismProfile],
    group: &GroupSpec,
    ai_agent: usize,
    target_lambda: f64,
    chef_truth: &AltruismProfile,
    beta: f64,
    qre_cfg: &QreConfig,
    frames: &SeatFrames,
) -> Result<SynthesisOutcome> {
    if group.len() != 2 {
        return Err(Error::InvalidParameter(
            "partner synthesis needs a two-player group".into(),
        ));
    }
    let ai_seat = group
        .seat_of(ai_agent)
        .ok_or_else(|| Error::InvalidParameter(format!("agent {ai_agent} not in the group")))?;
    let chef_seat = 1 - ai_seat;
    let chef_agent = group.members()[chef_seat];

    // Per-seat views of the intrinsic tables.
    let frame_table = |tab: &Array2<f64>, seat: usize| -> Array2<f64> {
        match frames.get(seat).and_then(|f| f.as_ref()) {
            Some(frame) => {
                let mut out = tab.clone();
                for (s, &from) in frame.iter().enumerate() {
                    out.row_mut(s).assign(&tab.row(from));
                }
                out
            }
            None => tab.clone(),
        }
    };
    let ai_r = frame_table(&inferred[ai_agent].intrinsic, ai_seat);
    let chef_inferred_r = frame_table(&inferred[chef_agent].intrinsic, chef_seat);
    let chef_true_r = frame_table(&chef_truth.intrinsic, chef_seat);

    // Partner reward: inferred own table plus the tunable altruism toward the
    // chef's inferred table. Chef reward: its true table, egoistically.
    let table = game.joint_actions();
    let (s_count, j_count) = (game.num_states, table.len());
    let mut r_ai = Array2::<f64>::zeros((s_count, j_count));
    let mut r_chef = Array2::<f64>::zeros((s_count, j_count));
    for s in 0..s_count {
        for j in 0..j_count {
            let acts = table.actions(j);
            r_ai[[s, j]] = ai_r[[s, acts[ai_seat]]]
                + target_lambda * chef_inferred_r[[s, acts[chef_seat]]];
            r_chef[[s, j]] = chef_true_r[[s, acts[chef_seat]]];
        }
    }
    let seats = if ai_seat == 0 {
        vec![r_ai, r_chef]
    } else {
        vec![r_chef, r_ai]
    };
    let reward = crate::game::GroupReward::new(seats)?;

    let solution = solve_qre(game, &reward, beta, qre_cfg)?;
    if !solution.converged {
        return Err(Error::NoConvergence(format!(
            "partner synthesis equilibrium residual {}",
            solution.residual
        )));
    }
    let bundle =
        crate::game::soft_policy_evaluation(game, &reward, &solution.policy, beta)?;
    let chef_value = game
        .initial_dist
        .iter()
        .zip(bundle.values[chef_seat].iter())
        .map(|(w, v)| w * v)
        .sum();
    Ok(SynthesisOutcome {
        joint: solution.policy,
        chef_value,
        residual: solution.residual,
    })
}

/// Spearman rank correlation between two equal-length sequences.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(values: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values"));
        let mut out = vec![0.0; values.len()];
        for (rank, &i) in idx.iter().enumerate() {
            out[i] = rank as f64;
        }
        out
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mean = (n - 1.0) / 2.0;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..xs.len() {
        cov += (rx[i] - mean) * (ry[i] - mean);
        vx += (rx[i] - mean) * (rx[i] - mean);
        vy += (ry[i] - mean) * (ry[i] - mean);
    }
    cov / (vx.sqrt() * vy.sqrt())
}
