//! Entropy-regularised policy evaluation and induced transition kernels.

use ndarray::{s, Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{entropy, LuFactors};

use super::{GroupReward, JointPolicy, RewardlessGame, ValueBundle};

/// Transition kernels of one seat induced by the other seats' policies:
/// for each own action `a`, `M_a[s, s'] = E_{a_-i ~ pi_-i} T(s' | s, a, a_-i)`.
///
/// `others` lists the policies of every seat except `agent_seat`, in seat
/// order.
pub fn induced_transition(
    game: &RewardlessGame,
    others: &[Array2<f64>],
    agent_seat: usize,
) -> Result<Vec<Array2<f64>>> {
    let opp = opponent_weights(game, others, agent_seat)?;
    let (s_count, a_count) = (game.num_states, game.num_actions);
    let mut kernels = vec![Array2::<f64>::zeros((s_count, s_count)); a_count];
    let table = game.joint_actions();
    for s in 0..s_count {
        for j in 0..table.len() {
            let w = opp[[s, j]];
            if w == 0.0 {
                continue;
            }
            let own = table.actions(j)[agent_seat];
            kernels[own]
                .row_mut(s)
                .scaled_add(w, &game.transition.slice(s![s, j, ..]));
        }
    }
    Ok(kernels)
}

/// Opponent mixture weights for one seat: `W[s, j] = prod_{k != seat} pi_k(a_k | s)`
/// where `j` runs over full joint actions (the seat's own action is ignored).
pub(crate) fn opponent_weights(
    game: &RewardlessGame,
    others: &[Array2<f64>],
    agent_seat: usize,
) -> Result<Array2<f64>> {
    if agent_seat >= game.num_players {
        return Err(Error::InvalidParameter(format!(
            "agent seat {agent_seat} out of range for {} players",
            game.num_players
        )));
    }
    if others.len() != game.num_players - 1 {
        return Err(Error::DimensionMismatch(format!(
            "expected {} opponent policies, got {}",
            game.num_players - 1,
            others.len()
        )));
    }
    for (k, m) in others.iter().enumerate() {
        if m.dim() != (game.num_states, game.num_actions) {
            return Err(Error::DimensionMismatch(format!(
                "opponent policy {k} has shape {:?}, expected ({}, {})",
                m.dim(),
                game.num_states,
                game.num_actions
            )));
        }
    }
    let table = game.joint_actions();
    let mut w = Array2::<f64>::ones((game.num_states, table.len()));
    for s in 0..game.num_states {
        for j in 0..table.len() {
            let acts = table.actions(j);
            let mut p = 1.0;
            let mut pos = 0;
            for (seat, &a) in acts.iter().enumerate() {
                if seat == agent_seat {
                    continue;
                }
                p *= others[pos][[s, a]];
                pos += 1;
            }
            w[[s, j]] = p;
        }
    }
    Ok(w)
}

/// Everything the solvers need from evaluating one joint policy under one
/// group reward: mixture weights, the induced state chain with its
/// factorisation, and per-seat V / Q / Qbar.
#[derive(Debug, Clone)]
pub(crate) struct EvalCache {
    pub beta: f64,
    pub policies: Vec<Array2<f64>>,
    /// `pi(a_vec | s)` over flattened joint actions.
    pub joint_probs: Array2<f64>,
    /// Per seat: opponent products over flattened joint actions.
    pub opponent_probs: Vec<Array2<f64>>,
    /// Factorisation of `I - gamma * T^pi` where `T^pi` is the
    /// joint-policy-induced state chain.
    pub lu: LuFactors,
    pub values: Vec<Array1<f64>>,
    pub q: Vec<Array2<f64>>,
    pub qbar: Vec<Array2<f64>>,
}

impl EvalCache {
    pub fn new(
        game: &RewardlessGame,
        reward: &GroupReward,
        joint: &JointPolicy,
        beta: f64,
    ) -> Result<Self> {
        if beta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "entropy coefficient must be positive, got {beta}"
            )));
        }
        let n = game.num_players;
        if joint.num_seats() != n || reward.num_seats() != n {
            return Err(Error::DimensionMismatch(format!(
                "game has {n} seats, joint policy {} and reward {}",
                joint.num_seats(),
                reward.num_seats()
            )));
        }
        if joint.num_states() != game.num_states || joint.num_actions() != game.num_actions {
            return Err(Error::DimensionMismatch(format!(
                "policy shape ({}, {}) does not match game ({}, {})",
                joint.num_states(),
                joint.num_actions(),
                game.num_states,
                game.num_actions
            )));
        }
        let s_count = game.num_states;
        let table = game.joint_actions();
        let j_count = table.len();
        if reward.seat(0).dim() != (s_count, j_count) {
            return Err(Error::DimensionMismatch(format!(
                "reward shape {:?} does not match ({s_count}, {j_count})",
                reward.seat(0).dim()
            )));
        }

        let mut opponent_probs = Vec::with_capacity(n);
        for seat in 0..n {
            opponent_probs.push(opponent_weights(game, &joint.others(seat), seat)?);
        }
        let mut joint_probs = opponent_probs[0].clone();
        let seat0 = joint.seat(0);
        for s in 0..s_count {
            for j in 0..j_count {
                joint_probs[[s, j]] *= seat0[[s, table.actions(j)[0]]];
            }
        }

        let mut chain = Array2::<f64>::zeros((s_count, s_count));
        for s in 0..s_count {
            let mut row = chain.row_mut(s);
            for j in 0..j_count {
                let w = joint_probs[[s, j]];
                if w != 0.0 {
                    row.scaled_add(w, &game.transition.slice(s![s, j, ..]));
                }
            }
        }
        let system = Array2::<f64>::eye(s_count) - &(game.discount * &chain);
        let lu = LuFactors::new(system.view())?;

        let mut values = Vec::with_capacity(n);
        let mut q = Vec::with_capacity(n);
        let mut qbar = Vec::with_capacity(n);
        for seat in 0..n {
            let r_seat = reward.seat(seat);
            let mut b = Array1::<f64>::zeros(s_count);
            for s in 0..s_count {
                let expected_reward = joint_probs.row(s).dot(&r_seat.row(s));
                let ent = entropy(joint.seat(seat).row(s));
                b[s] = expected_reward + ent / beta;
            }
            let v = lu.solve(b.view());

            let mut q_seat = Array2::<f64>::zeros((s_count, j_count));
            for s in 0..s_count {
                let future = game.transition.slice(s![s, .., ..]).dot(&v);
                let mut row = q_seat.row_mut(s);
                row.assign(&r_seat.row(s));
                row.scaled_add(game.discount, &future);
            }

            let mut qbar_seat = Array2::<f64>::zeros((s_count, game.num_actions));
            let opp = &opponent_probs[seat];
            for s in 0..s_count {
                for j in 0..j_count {
                    let own = table.actions(j)[seat];
                    qbar_seat[[s, own]] += opp[[s, j]] * q_seat[[s, j]];
                }
            }

            values.push(v);
            q.push(q_seat);
            qbar.push(qbar_seat);
        }

        Ok(Self {
            beta,
            policies: joint.seats().to_vec(),
            joint_probs,
            opponent_probs,
            lu,
            values,
            q,
            qbar,
        })
    }

    /// Reverse-mode pass through the evaluation. `seeds[i]`, when present, is
    /// the adjoint of `Qbar_i` (shape `(S, A)`). Returns adjoints of the
    /// per-seat reward tensors and, when requested, of the per-seat policies.
    ///
    /// Uses that `V_i` solves the linear system `(I - gamma T^pi) V_i = b_i`,
    /// so adjoints propagate through one transposed solve per seeded seat.
    pub fn backward(
        &self,
        game: &RewardlessGame,
        seeds: &[Option<Array2<f64>>],
        want_policy: bool,
    ) -> EvalAdjoint {
        let s_count = game.num_states;
        let a_count = game.num_actions;
        let n = game.num_players;
        let table = game.joint_actions();
        let j_count = table.len();

        let mut reward_bar = vec![Array2::<f64>::zeros((s_count, j_count)); n];
        let mut policy_bar = if want_policy {
            Some(vec![Array2::<f64>::zeros((s_count, a_count)); n])
        } else {
            None
        };

        for seat in 0..n {
            let seed = match &seeds[seat] {
                Some(seed) => seed,
                None => continue,
            };
            let opp = &self.opponent_probs[seat];

            // Adjoint of Q_i from the Qbar mixing step.
            let mut q_adj = Array2::<f64>::zeros((s_count, j_count));
            for s in 0..s_count {
                for j in 0..j_count {
                    let own = table.actions(j)[seat];
                    q_adj[[s, j]] = seed[[s, own]] * opp[[s, j]];
                }
            }

            // Adjoint of V_i through Q_i's discounted lookahead, then through
            // the linear evaluation system.
            let mut v_adj = Array1::<f64>::zeros(s_count);
            for s in 0..s_count {
                let t_s = game.transition.slice(s![s, .., ..]);
                v_adj.scaled_add(game.discount, &q_adj.row(s).dot(&t_s));
            }
            let w = self.lu.solve_transpose(v_adj.view());

            for s in 0..s_count {
                for j in 0..j_count {
                    reward_bar[seat][[s, j]] += q_adj[[s, j]] + w[s] * self.joint_probs[[s, j]];
                }
            }

            if let Some(policy_bar) = policy_bar.as_mut() {
                let q_seat = &self.q[seat];
                for s in 0..s_count {
                    for j in 0..j_count {
                        let acts = table.actions(j);
                        let qv = q_seat[[s, j]];
                        let mix_adj = seed[[s, acts[seat]]];
                        for k in 0..n {
                            // Expected-reward and chain terms reach every seat;
                            // the Qbar mixture excludes the seeded seat itself.
                            let mut coeff = w[s] * qv * self.prod_except(s, acts, k, None);
                            if k != seat {
                                coeff += mix_adj * qv * self.prod_except(s, acts, k, Some(seat));
                            }
                            policy_bar[k][[s, acts[k]]] += coeff;
                        }
                    }
                    // Entropy term of the seeded seat's own policy.
                    for a in 0..a_count {
                        let p = self.policies[seat][[s, a]].max(1e-300);
                        policy_bar[seat][[s, a]] += w[s] * (-(p.ln()) - 1.0) / self.beta;
                    }
                }
            }
        }

        EvalAdjoint {
            reward_bar,
            policy_bar,
        }
    }

    /// Product of policy probabilities over all seats except `skip` (and
    /// optionally `skip2`).
    fn prod_except(&self, s: usize, acts: &[usize], skip: usize, skip2: Option<usize>) -> f64 {
        let mut p = 1.0;
        for (k, &a) in acts.iter().enumerate() {
            if k == skip || Some(k) == skip2 {
                continue;
            }
            p *= self.policies[k][[s, a]];
        }
        p
    }
}

/// Adjoints produced by [`EvalCache::backward`].
#[derive(Debug, Clone)]
pub(crate) struct EvalAdjoint {
    pub reward_bar: Vec<Array2<f64>>,
    pub policy_bar: Option<Vec<Array2<f64>>>,
}

/// Evaluate a joint policy under a group reward: solves the linear Bellman
/// fixed point `V_i = rbar_i + H(pi_i)/beta + gamma T^pi V_i` per seat and
/// assembles Q and opponent-expected Q tensors.
pub fn soft_policy_evaluation(
    game: &RewardlessGame,
    reward: &GroupReward,
    joint: &JointPolicy,
    beta: f64,
) -> Result<ValueBundle> {
    let cache = EvalCache::new(game, reward, joint, beta)?;
    Ok(ValueBundle {
        values: cache.values,
        q_values: cache.q,
        expected_q: cache.qbar,
        beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{generate_random_mg, RandomMgConfig, Sparsity};
    use crate::rewards::compose_group_reward;
    use crate::rewards::GroupSpec;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array3};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_policy(s: usize, a: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let mut m = Array2::from_shape_fn((s, a), |_| rng.gen_range(0.05..1.0));
        for mut row in m.rows_mut() {
            let sum: f64 = row.iter().sum();
            row.mapv_inplace(|v| v / sum);
        }
        m
    }

    fn small_game(seed: u64, s: usize, a: usize, n: usize, m: usize) -> (RewardlessGame, Vec<crate::rewards::AltruismProfile>) {
        let cfg = RandomMgConfig {
            num_states: s,
            num_actions: a,
            num_players: n,
            num_agents: m,
            sparsity: Sparsity::Fraction(0.25),
            seed,
            ..RandomMgConfig::default()
        };
        generate_random_mg(&cfg).unwrap()
    }

    #[test]
    fn induced_transition_deterministic_opponent() {
        // 2-player game; the other agent always plays action 0, so the induced
        // kernel is the corresponding slice of the tensor.
        let (game, _) = small_game(1, 4, 2, 2, 2);
        let mut other = Array2::zeros((4, 2));
        other.column_mut(0).fill(1.0);
        let kernels = induced_transition(&game, &[other], 0).unwrap();
        let table = game.joint_actions();
        for a in 0..2 {
            let j = table.index(&[a, 0]);
            for s in 0..4 {
                for sp in 0..4 {
                    assert_abs_diff_eq!(
                        kernels[a][[s, sp]],
                        game.transition[[s, j, sp]],
                        epsilon = 1e-15
                    );
                }
            }
        }
    }

    #[test]
    fn induced_transition_single_state() {
        let t = Array3::from_shape_vec((1, 4, 1), vec![1.0; 4]).unwrap();
        let game = RewardlessGame::new(1, 2, 2, t, 0.9, array![1.0]).unwrap();
        let other = array![[0.3, 0.7]];
        let kernels = induced_transition(&game, &[other], 1).unwrap();
        for k in kernels {
            assert_abs_diff_eq!(k[[0, 0]], 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn induced_transition_matches_bruteforce() {
        // 3-player game: check against direct summation over all opponent
        // joint actions.
        let (game, _) = small_game(5, 4, 2, 3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let seat = 1usize;
        let others = vec![random_policy(4, 2, &mut rng), random_policy(4, 2, &mut rng)];
        let kernels = induced_transition(&game, &others, seat).unwrap();
        let table = game.joint_actions();
        for own in 0..2 {
            for s in 0..4 {
                let row_sum: f64 = kernels[own].row(s).sum();
                assert_abs_diff_eq!(row_sum, 1.0, epsilon = 1e-10);
                for sp in 0..4 {
                    // Oracle: loop the opponents' actions explicitly.
                    let mut expect = 0.0;
                    for b0 in 0..2usize {
                        for b1 in 0..2usize {
                            let w = others[0][[s, b0]] * others[1][[s, b1]];
                            let j = table.index(&[b0, own, b1]);
                            expect += w * game.transition[[s, j, sp]];
                        }
                    }
                    assert_abs_diff_eq!(kernels[own][[s, sp]], expect, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn induced_transition_rejects_bad_seat_count() {
        let (game, _) = small_game(2, 3, 2, 2, 2);
        assert!(induced_transition(&game, &[], 0).is_err());
    }

    #[test]
    fn evaluation_degenerate_single_action() {
        // |S|=1, |A|=1, n=1, R=1, gamma=0.9: V = 1 / (1 - 0.9) = 10.
        let t = Array3::from_shape_vec((1, 1, 1), vec![1.0]).unwrap();
        let game = RewardlessGame::new(1, 1, 1, t, 0.9, array![1.0]).unwrap();
        let reward = GroupReward::new(vec![array![[1.0]]]).unwrap();
        let joint = JointPolicy::new(vec![array![[1.0]]]).unwrap();
        let bundle = soft_policy_evaluation(&game, &reward, &joint, 1.0).unwrap();
        assert_abs_diff_eq!(bundle.values[0][0], 10.0, epsilon = 1e-9);
    }

    #[test]
    fn evaluation_zero_reward_uniform_policy() {
        // V = H(uniform) / (beta * (1 - gamma)) when entropy is constant over
        // states: for |A|=2, beta=0.1, gamma=0.9 this is ln(2) / 0.01.
        let (game, _) = small_game(3, 3, 2, 2, 2);
        let j = game.num_joint_actions();
        let reward =
            GroupReward::new(vec![Array2::zeros((3, j)), Array2::zeros((3, j))]).unwrap();
        let joint = JointPolicy::uniform(&game);
        let bundle = soft_policy_evaluation(&game, &reward, &joint, 0.1).unwrap();
        let expect = 2f64.ln() / (0.1 * (1.0 - 0.9));
        assert_abs_diff_eq!(expect, 69.31471805599453, epsilon = 1e-10);
        for seat in 0..2 {
            for s in 0..3 {
                assert_abs_diff_eq!(bundle.values[seat][s], expect, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn evaluation_bellman_identity() {
        // V_i(s) = sum_a pi_i(a|s) [Qbar_i(s,a) - log pi_i(a|s) / beta].
        let (game, profiles) = small_game(11, 3, 2, 2, 2);
        let group = GroupSpec::new(vec![0, 1]).unwrap();
        let reward = compose_group_reward(&profiles, &group, game.joint_actions()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let joint = JointPolicy::new(vec![
            random_policy(3, 2, &mut rng),
            random_policy(3, 2, &mut rng),
        ])
        .unwrap();
        let beta = 0.4;
        let bundle = soft_policy_evaluation(&game, &reward, &joint, beta).unwrap();
        for seat in 0..2 {
            for s in 0..3 {
                let mut rhs = 0.0;
                for a in 0..2 {
                    let p = joint.seat(seat)[[s, a]];
                    rhs += p * (bundle.expected_q[seat][[s, a]] - p.ln() / beta);
                }
                assert_abs_diff_eq!(bundle.values[seat][s], rhs, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn evaluation_matches_monte_carlo_rollout() {
        let (game, profiles) = small_game(21, 3, 2, 2, 2);
        let group = GroupSpec::new(vec![0, 1]).unwrap();
        let reward = compose_group_reward(&profiles, &group, game.joint_actions()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let joint = JointPolicy::new(vec![
            random_policy(3, 2, &mut rng),
            random_policy(3, 2, &mut rng),
        ])
        .unwrap();
        let beta = 0.5;
        let bundle = soft_policy_evaluation(&game, &reward, &joint, beta).unwrap();

        // Monte-Carlo oracle: truncated discounted rollouts from state 0.
        let episodes = 600;
        let horizon = 10_000;
        let seat = 0usize;
        let table = game.joint_actions();
        let mut returns = Vec::with_capacity(episodes);
        for _ in 0..episodes {
            let mut s = 0usize;
            let mut acc = 0.0;
            let mut disc = 1.0;
            for _ in 0..horizon {
                let mut acts = [0usize; 2];
                for (i, act) in acts.iter_mut().enumerate() {
                    let u: f64 = rng.gen();
                    *act = if u < joint.seat(i)[[s, 0]] { 0 } else { 1 };
                }
                let j = table.index(&acts);
                let ent = crate::linalg::entropy(joint.seat(seat).row(s));
                acc += disc * (reward.seat(seat)[[s, j]] + ent / beta);
                disc *= game.discount;
                if disc < 1e-16 {
                    break;
                }
                let u: f64 = rng.gen();
                let mut cum = 0.0;
                let mut next = game.num_states - 1;
                for sp in 0..game.num_states {
                    cum += game.transition[[s, j, sp]];
                    if u < cum {
                        next = sp;
                        break;
                    }
                }
                s = next;
            }
            returns.push(acc);
        }
        let mean: f64 = returns.iter().sum::<f64>() / episodes as f64;
        let var: f64 =
            returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (episodes - 1) as f64;
        let se = (var / episodes as f64).sqrt();
        assert!(
            (bundle.values[seat][0] - mean).abs() < 3.0 * se,
            "value {} vs MC {} (se {})",
            bundle.values[seat][0],
            mean,
            se
        );
    }

    #[test]
    fn evaluation_linear_in_reward() {
        let (game, profiles) = small_game(31, 4, 2, 2, 3);
        let group = GroupSpec::new(vec![0, 1]).unwrap();
        let r1 = compose_group_reward(&profiles, &group, game.joint_actions()).unwrap();
        let group2 = GroupSpec::new(vec![1, 2]).unwrap();
        let r2 = compose_group_reward(&profiles, &group2, game.joint_actions()).unwrap();
        let j = game.num_joint_actions();
        let zero = GroupReward::new(vec![Array2::zeros((4, j)); 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let joint = JointPolicy::new(vec![
            random_policy(4, 2, &mut rng),
            random_policy(4, 2, &mut rng),
        ])
        .unwrap();
        let beta = 0.2;
        let (a, b) = (1.7, -0.6);
        let combo = GroupReward::new(
            (0..2)
                .map(|i| a * r1.seat(i) + b * r2.seat(i))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let v_combo = soft_policy_evaluation(&game, &combo, &joint, beta).unwrap();
        let v1 = soft_policy_evaluation(&game, &r1, &joint, beta).unwrap();
        let v2 = soft_policy_evaluation(&game, &r2, &joint, beta).unwrap();
        let v0 = soft_policy_evaluation(&game, &zero, &joint, beta).unwrap();
        for seat in 0..2 {
            for s in 0..4 {
                let lhs = v_combo.values[seat][s] - v0.values[seat][s];
                let rhs = a * (v1.values[seat][s] - v0.values[seat][s])
                    + b * (v2.values[seat][s] - v0.values[seat][s]);
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn evaluation_player_permutation_invariance() {
        // Build a permutation-invariant tensor by averaging over seat swaps,
        // then renormalising; swapping seats and policies must leave values
        // unchanged.
        let s_count = 3;
        let a_count = 2;
        let table = JointActionTable::new(2, a_count);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut t = Array3::<f64>::zeros((s_count, table.len(), s_count));
        for s in 0..s_count {
            for j in 0..table.len() {
                for sp in 0..s_count {
                    t[[s, j, sp]] = rng.gen_range(0.1..1.0);
                }
            }
        }
        // Symmetrise over the two seats.
        let mut sym = t.clone();
        for s in 0..s_count {
            for j in 0..table.len() {
                let acts = table.actions(j);
                let swapped = table.index(&[acts[1], acts[0]]);
                for sp in 0..s_count {
                    sym[[s, j, sp]] = 0.5 * (t[[s, j, sp]] + t[[s, swapped, sp]]);
                }
            }
        }
        for s in 0..s_count {
            for j in 0..table.len() {
                let sum: f64 = sym.slice(s![s, j, ..]).sum();
                for sp in 0..s_count {
                    sym[[s, j, sp]] /= sum;
                }
            }
        }
        let game = RewardlessGame::new(
            s_count,
            a_count,
            2,
            sym,
            0.9,
            Array1::from_elem(s_count, 1.0 / s_count as f64),
        )
        .unwrap();

        let p0 = random_policy(s_count, a_count, &mut rng);
        let p1 = random_policy(s_count, a_count, &mut rng);
        let mut r0 = Array2::<f64>::zeros((s_count, table.len()));
        let mut r1 = Array2::<f64>::zeros((s_count, table.len()));
        for s in 0..s_count {
            for j in 0..table.len() {
                r0[[s, j]] = rng.gen_range(0.0..1.0);
                r1[[s, j]] = rng.gen_range(0.0..1.0);
            }
        }
        // Relabelled seating: each agent keeps its reward expressed in the
        // new seat order, i.e. with the joint-action axes swapped.
        let swap_axes = |r: &Array2<f64>| -> Array2<f64> {
            let mut out = r.clone();
            for s in 0..s_count {
                for j in 0..table.len() {
                    let acts = table.actions(j);
                    out[[s, j]] = r[[s, table.index(&[acts[1], acts[0]])]];
                }
            }
            out
        };
        let beta = 0.3;
        let forward = soft_policy_evaluation(
            &game,
            &GroupReward::new(vec![r0.clone(), r1.clone()]).unwrap(),
            &JointPolicy::new(vec![p0.clone(), p1.clone()]).unwrap(),
            beta,
        )
        .unwrap();
        let swapped = soft_policy_evaluation(
            &game,
            &GroupReward::new(vec![swap_axes(&r1), swap_axes(&r0)]).unwrap(),
            &JointPolicy::new(vec![p1, p0]).unwrap(),
            beta,
        )
        .unwrap();
        for s in 0..s_count {
            assert_abs_diff_eq!(
                forward.values[0][s],
                swapped.values[1][s],
                epsilon = 1e-10
            );
            assert_abs_diff_eq!(
                forward.values[1][s],
                swapped.values[0][s],
                epsilon = 1e-10
            );
        }
    }

    use super::super::JointActionTable;
    use ndarray::Array1;
}
