//! Direct reward posterior: SGLD on the demonstration likelihood under QRE
//! policies.
//!
//! Each step re-solves every group's equilibrium at the current rewards
//! (warm-started from the previous step) and differentiates the log-likelihood
//! by reverse mode through a fixed number of damped soft-response iterations
//! anchored at the solved equilibrium. The truncation error decays
//! geometrically in the unroll depth.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{solve_qre_from, JointPolicy, QreConfig, RewardlessGame};
use crate::game::{EvalCache, GroupReward};
use crate::gaps::{psi_grad_from_reward_bar, SeatFrames};
use crate::linalg::softmax_rows;
use crate::rewards::{compose_effective, materialize, AltruismProfile, GroupSpec, ParamBounds};
use crate::rng::{substream, Stream};

use super::priors::{log_prior_reward, log_prior_reward_grad, sample_beta, PriorConfig};
use super::sgld::{SgldSchedule, SgldState};
use super::{
    action_counts, reward_chain::init_params, reward_chain::update_params, ChainKeys,
    DemonstrationSet, RewardChainSamples, RewardDraw,
};

/// Settings for the DRP chain.
#[derive(Debug, Clone)]
pub struct DrpConfig {
    pub prior: PriorConfig,
    pub schedule: SgldSchedule,
    pub bounds: ParamBounds,
    pub qre: QreConfig,
    /// Damped soft-response iterations differentiated per solve.
    pub unroll: usize,
}

impl Default for DrpConfig {
    fn default() -> Self {
        Self {
            prior: PriorConfig {
                reward_sigma: 1.0 / 40.0,
                ..PriorConfig::default()
            },
            schedule: SgldSchedule::new(0.1, 0.05, 1_000, 500),
            bounds: ParamBounds::default(),
            qre: QreConfig::default(),
            unroll: 50,
        }
    }
}

/// Log-likelihood of count data under the QRE at the given reward, plus the
/// adjoints of the composed per-seat reward tensors, obtained by reverse mode
/// through `unroll` recorded soft-response iterations starting at `warm`.
///
/// Returns the converged logits for the next warm start.
pub(crate) fn qre_log_likelihood_grad(
    game: &RewardlessGame,
    reward: &GroupReward,
    counts: &[Array2<f64>],
    beta: f64,
    warm: Vec<Array2<f64>>,
    qre_cfg: &QreConfig,
    unroll: usize,
) -> Result<(f64, Vec<Array2<f64>>, Vec<Array2<f64>>)> {
    // Bring the warm start to the current equilibrium; on failure retry once
    // with halved damping before giving up.
    let (solution, logits) = solve_qre_from(game, reward, beta, qre_cfg, warm)?;
    let logits = if solution.converged {
        logits
    } else {
        let softer = QreConfig {
            damping: qre_cfg.damping / 2.0,
            max_iters: qre_cfg.max_iters * 2,
            ..*qre_cfg
        };
        let (retry, logits) = solve_qre_from(game, reward, beta, &softer, logits)?;
        if !retry.converged {
            return Err(Error::NoConvergence(format!(
                "equilibrium residual {} above {}",
                retry.residual, qre_cfg.tolerance
            )));
        }
        logits
    };

    let n = game.num_players;
    let delta = qre_cfg.damping;

    // Record the iterates; at the fixed point they stay put, and the recorded
    // segment is what gets differentiated.
    let mut path = Vec::with_capacity(unroll + 1);
    path.push(logits);
    for _ in 0..unroll {
        let current = path.last().expect("nonempty path");
        let seats: Vec<Array2<f64>> = current.iter().map(softmax_rows).collect();
        let joint = JointPolicy::new(seats)?;
        let cache = EvalCache::new(game, reward, &joint, beta)?;
        let next: Vec<Array2<f64>> = (0..n)
            .map(|seat| {
                let mut z = current[seat].clone();
                z.zip_mut_with(&cache.qbar[seat], |zi, &q| {
                    *zi = (1.0 - delta) * *zi + delta * beta * q;
                });
                z
            })
            .collect();
        path.push(next);
    }

    // Likelihood head at the final iterate.
    let final_policies: Vec<Array2<f64>> = path[unroll].iter().map(softmax_rows).collect();
    let mut log_lik = 0.0;
    let mut z_bar: Vec<Array2<f64>> = Vec::with_capacity(n);
    for seat in 0..n {
        let pi = &final_policies[seat];
        let mut bar = Array2::<f64>::zeros(pi.dim());
        for s in 0..game.num_states {
            let row_total: f64 = counts[seat].row(s).sum();
            for a in 0..game.num_actions {
                let p = pi[[s, a]].max(1e-300);
                log_lik += counts[seat][[s, a]] * p.ln();
                bar[[s, a]] = counts[seat][[s, a]] - row_total * p;
            }
        }
        z_bar.push(bar);
    }

    // Reverse through the recorded iterations.
    let mut reward_bar =
        vec![Array2::<f64>::zeros((game.num_states, game.num_joint_actions())); n];
    for t in (0..unroll).rev() {
        let seats: Vec<Array2<f64>> = path[t].iter().map(softmax_rows).collect();
        let joint = JointPolicy::new(seats)?;
        let cache = EvalCache::new(game, reward, &joint, beta)?;
        let seeds: Vec<Option<Array2<f64>>> = z_bar
            .iter()
            .map(|zb| Some(zb.mapv(|v| delta * beta * v)))
            .collect();
        let adjoint = cache.backward(game, &seeds, true);
        for seat in 0..n {
            reward_bar[seat] += &adjoint.reward_bar[seat];
        }
        let policy_bar = adjoint.policy_bar.expect("policy adjoints requested");
        for seat in 0..n {
            let pi = joint.seat(seat);
            let mut next = z_bar[seat].mapv(|v| (1.0 - delta) * v);
            for s in 0..game.num_states {
                let inner: f64 = (0..game.num_actions)
                    .map(|a| pi[[s, a]] * policy_bar[seat][[s, a]])
                    .sum();
                for a in 0..game.num_actions {
                    next[[s, a]] += pi[[s, a]] * (policy_bar[seat][[s, a]] - inner);
                }
            }
            z_bar[seat] = next;
        }
    }

    Ok((log_lik, reward_bar, path.pop().expect("final logits")))
}

/// Run the DRP chain over multi-group demonstrations.
pub fn drp_chain(
    game: &RewardlessGame,
    demos: &DemonstrationSet,
    seat_frames: &[SeatFrames],
    num_agents: usize,
    cfg: &DrpConfig,
    keys: &ChainKeys,
) -> Result<RewardChainSamples> {
    if demos.groups.is_empty() || demos.groups.iter().all(|g| g.trajectories.is_empty()) {
        return Err(Error::MissingInput("no demonstrations".into()));
    }
    if cfg.schedule.iterations == 0 {
        return Ok(RewardChainSamples::default());
    }
    cfg.schedule.validate()?;
    if seat_frames.len() != demos.groups.len() {
        return Err(Error::DimensionMismatch(
            "one seat-frame set per demonstrated group is required".into(),
        ));
    }

    let (num_states, num_actions) = (game.num_states, game.num_actions);
    let counts: Vec<Vec<Array2<f64>>> = demos
        .groups
        .iter()
        .map(|g| action_counts(g, num_states, num_actions).0)
        .collect();
    let groups: Vec<GroupSpec> = demos.groups.iter().map(|g| g.group.clone()).collect();

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
    let mut warm: Vec<Vec<Array2<f64>>> = groups
        .iter()
        .map(|g| vec![Array2::<f64>::zeros((num_states, num_actions)); g.len()])
        .collect();

    let mut chain = RewardChainSamples::default();
    for t in 0..cfg.schedule.iterations {
        let betas: Vec<f64> = (0..groups.len())
            .map(|g| {
                let mut rng = substream(
                    keys.master_seed,
                    Stream::BetaDraw,
                    &[keys.group_tags[g], t as u64],
                );
                sample_beta(&cfg.prior, &mut rng)
            })
            .collect();
        let profiles: Vec<AltruismProfile> = params.iter().map(materialize).collect();

        type GroupOut = (f64, Vec<Array2<f64>>, Vec<Array2<f64>>);
        let per_group: Vec<Result<GroupOut>> = groups
            .par_iter()
            .enumerate()
            .map(|(g, group)| {
                let framed = crate::gaps::framed_profiles(&profiles, group, &seat_frames[g]);
                let reward = compose_effective(&framed, group, game.joint_actions())?;
                qre_log_likelihood_grad(
                    game,
                    &reward,
                    &counts[g],
                    betas[g],
                    warm[g].clone(),
                    &cfg.qre,
                    cfg.unroll,
                )
            })
            .collect();

        let mut total = log_prior_reward_grad(&params, &cfg.prior);
        let mut log_liks = Vec::with_capacity(groups.len());
        for (g, result) in per_group.into_iter().enumerate() {
            let (log_lik, reward_bar, next_warm) = result.map_err(|e| Error::ChainAborted {
                step: t,
                reason: format!("group {g}: {e}"),
            })?;
            psi_grad_from_reward_bar(
                &params,
                &groups[g],
                game.joint_actions(),
                &seat_frames[g],
                &reward_bar,
                &mut total,
            );
            warm[g] = next_warm;
            log_liks.push(log_lik);
        }

        if t >= cfg.schedule.warmup && (t - cfg.schedule.warmup) % cfg.schedule.thin == 0 {
            let log_prior = log_prior_reward(&params, &cfg.prior);
            chain.draws.push(RewardDraw {
                step: t,
                params: params.clone(),
                beta_samples: betas.clone(),
                group_diagnostics: log_liks.clone(),
                log_prior,
                log_posterior: log_prior + log_liks.iter().sum::<f64>(),
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{generate_random_mg, RandomMgConfig, Sparsity};
    use crate::game::{sample_trajectory, solve_qre, Trajectory};
    use crate::gaps::identity_frames;
    use crate::inference::GroupDemos;
    use crate::rewards::AgentRewardParams;
    use crate::gaps::RewardGradient;
    use crate::rng as rngmod;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unrolled_gradient_matches_finite_differences() {
        // rtol 1e-2: the forward solver is truncated, the finite-difference
        // oracle re-solves to convergence.
        let cfg = RandomMgConfig {
            num_states: 3,
            num_actions: 2,
            num_players: 2,
            num_agents: 2,
            sparsity: Sparsity::Fraction(0.3),
            seed: 21,
            ..RandomMgConfig::default()
        };
        let (game, _) = generate_random_mg(&cfg).unwrap();
        let group = GroupSpec::new(vec![0, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bounds = ParamBounds::default();
        let params: Vec<AgentRewardParams> = (0..2)
            .map(|_| AgentRewardParams {
                psi_r: Array2::from_shape_fn((3, 2), |_| rng.gen_range(-1.0..1.0)),
                psi_lambda: rng.gen_range(-1.0..1.0),
                bounds,
            })
            .collect();
        let mut counts = vec![Array2::<f64>::zeros((3, 2)); 2];
        for seat in 0..2 {
            for s in 0..3 {
                for a in 0..2 {
                    counts[seat][[s, a]] = rng.gen_range(0.0..30.0f64).floor();
                }
            }
        }
        let beta = 0.2;
        let qre_cfg = QreConfig {
            tolerance: 1e-12,
            ..QreConfig::default()
        };
        let frames = identity_frames(2);

        // Anchor logits: the equilibrium at the base parameters. The oracle
        // below runs a fixed number of damped iterations from this anchor so
        // the mapping psi -> log-likelihood is smooth and finite differences
        // are meaningful.
        let base_profiles: Vec<AltruismProfile> = params.iter().map(materialize).collect();
        let base_reward =
            compose_effective(&base_profiles, &group, game.joint_actions()).unwrap();
        let (_, anchor) = solve_qre_from(
            &game,
            &base_reward,
            beta,
            &qre_cfg,
            vec![Array2::<f64>::zeros((3, 2)); 2],
        )
        .unwrap();

        let eval_loglik = |params: &[AgentRewardParams]| -> f64 {
            // Independent forward pass: plain damped soft-response loop with
            // a fixed iteration budget, then count-weighted log-policy.
            let profiles: Vec<AltruismProfile> = params.iter().map(materialize).collect();
            let reward = compose_effective(&profiles, &group, game.joint_actions()).unwrap();
            let mut logits = anchor.clone();
            let delta = 0.5;
            for _ in 0..400 {
                let seats: Vec<Array2<f64>> =
                    logits.iter().map(crate::linalg::softmax_rows).collect();
                let joint = crate::game::JointPolicy::new(seats).unwrap();
                let bundle =
                    crate::game::soft_policy_evaluation(&game, &reward, &joint, beta).unwrap();
                for seat in 0..2 {
                    logits[seat].zip_mut_with(&bundle.expected_q[seat], |z, &q| {
                        *z = (1.0 - delta) * *z + delta * beta * q;
                    });
                }
            }
            let mut acc = 0.0;
            for seat in 0..2 {
                let pi = crate::linalg::softmax_rows(&logits[seat]);
                for s in 0..3 {
                    for a in 0..2 {
                        acc += counts[seat][[s, a]] * pi[[s, a]].ln();
                    }
                }
            }
            acc
        };

        let (loglik, reward_bar, _) = qre_log_likelihood_grad(
            &game,
            &base_reward,
            &counts,
            beta,
            anchor.clone(),
            &qre_cfg,
            50,
        )
        .unwrap();
        assert_abs_diff_eq!(loglik, eval_loglik(&params), epsilon = 1e-5);
        let mut grad = RewardGradient::zeros(2, 3, 2);
        psi_grad_from_reward_bar(
            &params,
            &group,
            game.joint_actions(),
            &frames,
            &reward_bar,
            &mut grad,
        );

        let eps = 1e-5;
        for agent in 0..2 {
            for s in 0..3 {
                for a in 0..2 {
                    let mut plus = params.clone();
                    plus[agent].psi_r[[s, a]] += eps;
                    let mut minus = params.clone();
                    minus[agent].psi_r[[s, a]] -= eps;
                    let fd = (eval_loglik(&plus) - eval_loglik(&minus)) / (2.0 * eps);
                    let exact = grad.psi_r[agent][[s, a]];
                    if exact.abs() > 1e-6 || fd.abs() > 1e-6 {
                        let rel = (exact - fd).abs() / exact.abs().max(fd.abs());
                        assert!(rel < 1e-2, "agent {agent} ({s},{a}): {exact} vs {fd}");
                    }
                }
            }
            let mut plus = params.clone();
            plus[agent].psi_lambda += eps;
            let mut minus = params.clone();
            minus[agent].psi_lambda -= eps;
            let fd = (eval_loglik(&plus) - eval_loglik(&minus)) / (2.0 * eps);
            let exact = grad.psi_lambda[agent];
            if exact.abs() > 1e-6 || fd.abs() > 1e-6 {
                let rel = (exact - fd).abs() / exact.abs().max(fd.abs());
                assert!(rel < 1e-2, "agent {agent} lambda: {exact} vs {fd}");
            }
        }
    }

    #[test]
    fn zero_iterations_returns_empty_chain() {
        let cfg = RandomMgConfig {
            num_states: 2,
            num_actions: 2,
            num_players: 2,
            num_agents: 2,
            seed: 2,
            ..RandomMgConfig::default()
        };
        let (game, profiles) = generate_random_mg(&cfg).unwrap();
        let group = GroupSpec::new(vec![0, 1]).unwrap();
        let reward =
            crate::rewards::compose_group_reward(&profiles, &group, game.joint_actions()).unwrap();
        let qre = solve_qre(&game, &reward, 0.1, &QreConfig::default()).unwrap();
        let mut rng = rngmod::substream(0, rngmod::Stream::DemoTrajectory, &[0]);
        let traj = sample_trajectory(&game, &qre.policy, 20, &mut rng).unwrap();
        let demos = DemonstrationSet {
            groups: vec![GroupDemos {
                group: group.clone(),
                trajectories: vec![traj],
            }],
        };
        let drp = DrpConfig {
            schedule: SgldSchedule::new(0.1, 0.05, 0, 0),
            ..DrpConfig::default()
        };
        let chain = drp_chain(
            &game,
            &demos,
            &[identity_frames(2)],
            2,
            &drp,
            &ChainKeys::new(0, 2, 1),
        )
        .unwrap();
        assert!(chain.draws.is_empty());
    }

    #[test]
    fn same_seed_reproduces_chain() {
        let cfg = RandomMgConfig {
            num_states: 2,
            num_actions: 2,
            num_players: 2,
            num_agents: 2,
            seed: 4,
            ..RandomMgConfig::default()
        };
        let (game, profiles) = generate_random_mg(&cfg).unwrap();
        let group = GroupSpec::new(vec![0, 1]).unwrap();
        let reward =
            crate::rewards::compose_group_reward(&profiles, &group, game.joint_actions()).unwrap();
        let qre = solve_qre(&game, &reward, 0.1, &QreConfig::default()).unwrap();
        let mut rng = rngmod::substream(1, rngmod::Stream::DemoTrajectory, &[0]);
        let traj = sample_trajectory(&game, &qre.policy, 30, &mut rng).unwrap();
        let demos = DemonstrationSet {
            groups: vec![GroupDemos {
                group: group.clone(),
                trajectories: vec![traj],
            }],
        };
        let drp = DrpConfig {
            schedule: SgldSchedule::new(0.1, 0.05, 12, 4),
            unroll: 20,
            ..DrpConfig::default()
        };
        let keys = ChainKeys::new(5, 2, 1);
        let a = drp_chain(&game, &demos, &[identity_frames(2)], 2, &drp, &keys).unwrap();
        let b = drp_chain(&game, &demos, &[identity_frames(2)], 2, &drp, &keys).unwrap();
        assert_eq!(a.draws.len(), b.draws.len());
        for (x, y) in a.draws.iter().zip(b.draws.iter()) {
            assert_eq!(x.params[0].psi_r, y.params[0].psi_r);
            assert_eq!(x.beta_samples, y.beta_samples);
        }
    }

    #[test]
    fn single_agent_posterior_mode_matches_logistic_regression() {
        // One state, two actions, gamma = 0: the QRE is softmax(beta r), so
        // the likelihood is logistic in the reward gap. With beta pinned by a
        // sharp prior and a weak reward prior, the chain's MAP reward gap
        // should match the logistic-regression estimate logit(p) / beta.
        let t = ndarray::Array3::from_shape_vec((1, 2, 1), vec![1.0, 1.0]).unwrap();
        let game = crate::game::RewardlessGame::new(1, 2, 1, t, 0.0, array![1.0]).unwrap();
        let group = GroupSpec::new(vec![0]).unwrap();
        // 60 draws of action 0, 40 of action 1.
        let steps: Vec<(usize, Vec<usize>)> = (0..100)
            .map(|i| (0usize, vec![usize::from(i >= 60)]))
            .collect();
        let demos = DemonstrationSet {
            groups: vec![GroupDemos {
                group: group.clone(),
                trajectories: vec![Trajectory { steps }],
            }],
        };
        let beta_pin = 2.0;
        let drp = DrpConfig {
            prior: PriorConfig {
                reward_sigma: 20.0, // effectively flat
                beta_min: beta_pin,
                beta_rate: 1e9,
                policy_sigma: None,
            },
            schedule: SgldSchedule::new(0.05, 0.1, 1_500, 300),
            bounds: ParamBounds::default(),
            qre: QreConfig::default(),
            unroll: 30,
        };
        let keys = ChainKeys::new(3, 1, 1);
        let chain = drp_chain(&game, &demos, &[identity_frames(1)], 1, &drp, &keys).unwrap();
        let map = super::super::point_estimate_params(&chain, crate::inference::PointEstimate::Map)
            .unwrap();
        let profile = materialize(&map[0]);
        let gap = profile.intrinsic[[0, 0]] - profile.intrinsic[[0, 1]];
        // Logistic regression oracle at the pinned beta.
        let p_hat = 0.6f64;
        let oracle = (p_hat / (1.0 - p_hat)).ln() / beta_pin;
        assert!(
            (gap - oracle).abs() < 0.05,
            "reward gap {gap} vs logistic fit {oracle}"
        );
    }
}
