//! Quantal response equilibrium solving by damped simultaneous soft responses.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::{kl_divergence, softmax_rows};

use super::eval::EvalCache;
use super::{GroupReward, JointPolicy, RewardlessGame};

/// Settings for the damped fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QreConfig {
    /// Geometric damping in probability space, in (0, 1].
    pub damping: f64,
    /// Stop once the policy stability residual drops below this.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for QreConfig {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tolerance: 1e-8,
            max_iters: 50_000,
        }
    }
}

/// Outcome of a QRE solve. `converged` is false when the iteration budget ran
/// out; `policy` then holds the best iterate seen and `residual` its policy
/// stability residual, leaving the decision to the caller.
#[derive(Debug, Clone)]
pub struct QreSolution {
    pub policy: JointPolicy,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Solve for the QRE of `(game, reward, beta)` starting from the uniform
/// joint policy.
pub fn solve_qre(
    game: &RewardlessGame,
    reward: &GroupReward,
    beta: f64,
    cfg: &QreConfig,
) -> Result<QreSolution> {
    let logits = vec![Array2::<f64>::zeros((game.num_states, game.num_actions)); game.num_players];
    solve_qre_from(game, reward, beta, cfg, logits).map(|(sol, _)| sol)
}

/// Solve from explicit starting logits; additionally returns the final
/// logits so callers can warm-start subsequent solves.
///
/// Each iteration evaluates the current joint policy, forms every seat's
/// soft response `sigma_i = softmax(beta Qbar_i)`, and applies the damped
/// update `logits_i <- (1 - d) logits_i + d beta Qbar_i`, which is the
/// geometric mixture `pi_i^(1-d) sigma_i^d` after normalisation. The residual
/// is `max_i sum_s KL(pi_i || sigma_i)`, zero exactly at the QRE.
pub fn solve_qre_from(
    game: &RewardlessGame,
    reward: &GroupReward,
    beta: f64,
    cfg: &QreConfig,
    mut logits: Vec<Array2<f64>>,
) -> Result<(QreSolution, Vec<Array2<f64>>)> {
    if !(0.0 < cfg.damping && cfg.damping <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "damping must lie in (0, 1], got {}",
            cfg.damping
        )));
    }
    if logits.len() != game.num_players {
        return Err(Error::DimensionMismatch(format!(
            "expected {} seats of starting logits, got {}",
            game.num_players,
            logits.len()
        )));
    }
    let n = game.num_players;
    let mut best_residual = f64::INFINITY;
    let mut best_logits = logits.clone();
    let mut iterations = 0;

    loop {
        let seats: Vec<Array2<f64>> = logits.iter().map(softmax_rows).collect();
        let joint = JointPolicy::new(seats)?;
        let cache = EvalCache::new(game, reward, &joint, beta)?;

        let mut residual: f64 = 0.0;
        let mut responses = Vec::with_capacity(n);
        for seat in 0..n {
            let scaled = cache.qbar[seat].mapv(|q| beta * q);
            let sigma = softmax_rows(&scaled);
            let mut acc = 0.0;
            for s in 0..game.num_states {
                acc += kl_divergence(joint.seat(seat).row(s), sigma.row(s));
            }
            residual = residual.max(acc);
            responses.push(scaled);
        }

        if residual < best_residual {
            best_residual = residual;
            best_logits = logits.clone();
        }
        if residual < cfg.tolerance {
            return Ok((
                QreSolution {
                    policy: joint,
                    residual,
                    iterations,
                    converged: true,
                },
                logits,
            ));
        }
        if iterations >= cfg.max_iters {
            let seats: Vec<Array2<f64>> = best_logits.iter().map(softmax_rows).collect();
            let policy = JointPolicy::new(seats)?;
            return Ok((
                QreSolution {
                    policy,
                    residual: best_residual,
                    iterations,
                    converged: false,
                },
                best_logits,
            ));
        }

        for seat in 0..n {
            let z = &mut logits[seat];
            z.zip_mut_with(&responses[seat], |zi, &r| {
                *zi = (1.0 - cfg.damping) * *zi + cfg.damping * r;
            });
        }
        iterations += 1;
    }
}
