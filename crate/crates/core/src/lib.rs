//! Tabular multi-agent inverse reinforcement learning with
//! altruism-structured rewards.
//!
//! Agents carry an intrinsic reward over their own state-action pairs plus a
//! latent altruism level weighting their partners' intrinsic rewards.
//! Observing the same agents across several groups makes both components
//! identifiable; this crate provides the machinery to exploit that:
//!
//! - [`game`]: rewardless Markov games, entropy-regularised evaluation, soft
//!   best responses, quantal response equilibria, trajectory sampling.
//! - [`rewards`]: the altruism-structured reward model and its bounded
//!   sigmoid parametrisation.
//! - [`gaps`]: policy-suboptimality measures (PSG, QIG) and their exact
//!   gradients with respect to reward parameters.
//! - [`inference`]: preconditioned SGLD chains for the direct reward
//!   posterior (DRP) and the two-step policy-oriented reward posterior
//!   (PORP).
//! - [`envs`]: seeded random Markov games and a gridworld kitchen.
//! - [`diagnostics`]: the identifiability rank check, partition-constant
//!   estimation, evaluation metrics, and altruism-imitation synthesis.
//! - [`harness`]: a config-driven experiment pipeline with persistent,
//!   reproducible artifacts.
//!
//! The `examples/` directory walks through each capability; the `mairl`
//! binary exposes the pipeline as subcommands over JSON configs.

pub mod diagnostics;
pub mod envs;
pub mod error;
pub mod game;
pub mod gaps;
pub mod harness;
pub mod inference;
pub mod linalg;
pub mod rewards;
pub mod rng;

pub use error::{Error, Result};
