//! Seeded random Markov games with sparse intrinsic rewards.

use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use rand_distr::{Dirichlet, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{JointActionTable, RewardlessGame};
use crate::rewards::{AltruismProfile, ParamBounds};
use crate::rng::{substream, Stream};

/// How many intrinsic reward entries are set to `r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sparsity {
    /// Exact number of rewarded `(state, action)` pairs per agent.
    Count(usize),
    /// `ceil(fraction * |S| * |A|)` rewarded pairs per agent.
    Fraction(f64),
}

impl Sparsity {
    pub fn count(&self, num_states: usize, num_actions: usize) -> usize {
        match *self {
            Sparsity::Count(k) => k,
            Sparsity::Fraction(f) => ((f * (num_states * num_actions) as f64).ceil() as usize).max(1),
        }
    }
}

/// Generator settings for a random Markov game plus its agent pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomMgConfig {
    pub num_states: usize,
    pub num_actions: usize,
    /// Seats per game.
    pub num_players: usize,
    /// Agents in the pool (at least `num_players`).
    pub num_agents: usize,
    pub dirichlet_alpha: f64,
    pub sparsity: Sparsity,
    pub discount: f64,
    pub lambda_range: (f64, f64),
    pub seed: u64,
}

impl Default for RandomMgConfig {
    fn default() -> Self {
        Self {
            num_states: 8,
            num_actions: 3,
            num_players: 2,
            num_agents: 4,
            dirichlet_alpha: 0.3,
            sparsity: Sparsity::Fraction(0.1),
            discount: 0.9,
            lambda_range: (-5.0, 5.0),
            seed: 0,
        }
    }
}

/// Sample a game and ground-truth profiles. Transition rows are iid
/// Dirichlet, altruism levels are uniform on the configured range, and each
/// intrinsic table has exactly the configured number of entries at `r_max`
/// (the rest at `r_min = 0`). Bit-reproducible per seed.
pub fn generate_random_mg(cfg: &RandomMgConfig) -> Result<(RewardlessGame, Vec<AltruismProfile>)> {
    if cfg.num_agents < cfg.num_players {
        return Err(Error::InvalidParameter(format!(
            "need at least {} agents for {}-player games, got {}",
            cfg.num_players, cfg.num_players, cfg.num_agents
        )));
    }
    if cfg.dirichlet_alpha <= 0.0 {
        return Err(Error::InvalidParameter(
            "dirichlet_alpha must be positive".into(),
        ));
    }
    let reward_count = cfg.sparsity.count(cfg.num_states, cfg.num_actions);
    if reward_count > cfg.num_states * cfg.num_actions {
        return Err(Error::InvalidParameter(format!(
            "sparsity count {reward_count} exceeds the {} available (state, action) pairs",
            cfg.num_states * cfg.num_actions
        )));
    }

    let table = JointActionTable::new(cfg.num_players, cfg.num_actions);
    let j_count = table.len();
    let mut transition = Array3::<f64>::zeros((cfg.num_states, j_count, cfg.num_states));
    let mut rng = substream(cfg.seed, Stream::EnvTransition, &[]);
    if cfg.num_states == 1 {
        transition.fill(1.0);
    } else {
        let dirichlet = Dirichlet::new_with_size(cfg.dirichlet_alpha, cfg.num_states)
            .map_err(|e| Error::InvalidParameter(format!("dirichlet: {e}")))?;
        for s in 0..cfg.num_states {
            for j in 0..j_count {
                let row = dirichlet.sample(&mut rng);
                let sum: f64 = row.iter().sum();
                for (sp, &p) in row.iter().enumerate() {
                    transition[[s, j, sp]] = p / sum;
                }
            }
        }
    }

    let initial = Array1::from_elem(cfg.num_states, 1.0 / cfg.num_states as f64);
    let game = RewardlessGame::new(
        cfg.num_states,
        cfg.num_actions,
        cfg.num_players,
        transition,
        cfg.discount,
        initial,
    )?;

    let bounds = ParamBounds {
        lambda_min: cfg.lambda_range.0,
        lambda_max: cfg.lambda_range.1,
        ..ParamBounds::default()
    };
    let mut profiles = Vec::with_capacity(cfg.num_agents);
    for agent in 0..cfg.num_agents {
        let mut lambda_rng = substream(cfg.seed, Stream::EnvLambda, &[agent as u64]);
        let altruism = lambda_rng.gen_range(cfg.lambda_range.0..cfg.lambda_range.1);
        let mut reward_rng = substream(cfg.seed, Stream::EnvReward, &[agent as u64]);
        let cells = cfg.num_states * cfg.num_actions;
        let chosen = rand::seq::index::sample(&mut reward_rng, cells, reward_count);
        let mut intrinsic = Array2::<f64>::from_elem(
            (cfg.num_states, cfg.num_actions),
            bounds.r_min,
        );
        for idx in chosen.iter() {
            intrinsic[[idx / cfg.num_actions, idx % cfg.num_actions]] = bounds.r_max;
        }
        profiles.push(AltruismProfile {
            intrinsic,
            altruism,
        });
    }
    Ok((game, profiles))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_stochastic_and_reproducible() {
        let cfg = RandomMgConfig::default();
        let (game, profiles) = generate_random_mg(&cfg).unwrap();
        for s in 0..cfg.num_states {
            for j in 0..game.num_joint_actions() {
                let sum: f64 = game.transition.slice(ndarray::s![s, j, ..]).sum();
                assert!((sum - 1.0).abs() <= 1e-12);
            }
        }
        let (game2, profiles2) = generate_random_mg(&cfg).unwrap();
        assert_eq!(game.transition, game2.transition);
        assert_eq!(profiles, profiles2);
    }

    #[test]
    fn sparsity_and_lambda_moments() {
        let cells = 6 * 2;
        let cfg = RandomMgConfig {
            num_states: 6,
            num_actions: 2,
            num_players: 2,
            num_agents: 200,
            sparsity: Sparsity::Count(3),
            ..RandomMgConfig::default()
        };
        let (_, profiles) = generate_random_mg(&cfg).unwrap();
        for p in &profiles {
            let ones = p.intrinsic.iter().filter(|&&v| v == 1.0).count();
            let zeros = p.intrinsic.iter().filter(|&&v| v == 0.0).count();
            assert_eq!(ones, 3);
            assert_eq!(zeros, cells - 3);
        }
        // Uniform lambda moments over many fresh seeds: mean 0, variance
        // (b-a)^2/12 = 100/12, both within 3 sigma.
        let mut lambdas = Vec::new();
        for seed in 0..50u64 {
            let cfg = RandomMgConfig {
                num_agents: 200,
                seed,
                ..cfg
            };
            let (_, profiles) = generate_random_mg(&cfg).unwrap();
            lambdas.extend(profiles.iter().map(|p| p.altruism));
        }
        let n = lambdas.len() as f64;
        let mean = lambdas.iter().sum::<f64>() / n;
        let var = lambdas.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let true_var = 100.0 / 12.0;
        let mean_sigma = (true_var / n).sqrt();
        assert!(mean.abs() < 3.0 * mean_sigma, "lambda mean {mean}");
        // Var(sample variance) ~ (mu4 - sigma^4)/n with mu4 = (b-a)^4/80.
        let mu4 = 10f64.powi(4) / 80.0;
        let var_sigma = ((mu4 - true_var * true_var) / n).sqrt();
        assert!(
            (var - true_var).abs() < 3.0 * var_sigma,
            "lambda variance {var} vs {true_var}"
        );
    }

    #[test]
    fn low_alpha_rows_are_spikier_than_high_alpha() {
        let base = RandomMgConfig {
            num_states: 10,
            num_actions: 2,
            num_players: 1,
            num_agents: 1,
            ..RandomMgConfig::default()
        };
        let spiky = generate_random_mg(&RandomMgConfig {
            dirichlet_alpha: 0.3,
            ..base
        })
        .unwrap()
        .0;
        let flat = generate_random_mg(&RandomMgConfig {
            dirichlet_alpha: 10.0,
            ..base
        })
        .unwrap()
        .0;
        let max_mean = |g: &RewardlessGame| -> f64 {
            let mut acc = 0.0;
            let mut count = 0.0;
            for s in 0..g.num_states {
                for j in 0..g.num_joint_actions() {
                    let m = g
                        .transition
                        .slice(ndarray::s![s, j, ..])
                        .iter()
                        .cloned()
                        .fold(0.0f64, f64::max);
                    acc += m;
                    count += 1.0;
                }
            }
            acc / count
        };
        assert!(max_mean(&spiky) > max_mean(&flat));
    }

    #[test]
    fn excessive_sparsity_is_rejected() {
        let cfg = RandomMgConfig {
            num_states: 2,
            num_actions: 2,
            sparsity: Sparsity::Count(5),
            ..RandomMgConfig::default()
        };
        assert!(generate_random_mg(&cfg).is_err());
    }
}
