//! Preconditioned stochastic-gradient Langevin kernel.
//!
//! RMSProp-style diagonal preconditioning: an exponential moving average `v`
//! of squared gradients yields `G = 1 / (sqrt(v) + eps)`; the update is
//! `x += (e_t / 2) G * grad + noise` with `noise ~ N(0, e_t G)` elementwise
//! and step sizes decaying as `e_t = e_0 / (1 + t)^alpha`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-size schedule and preconditioner constants for one chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgldSchedule {
    pub epsilon0: f64,
    /// Step decay exponent; zero keeps the step constant.
    pub alpha: f64,
    pub iterations: usize,
    pub warmup: usize,
    /// Keep every `thin`-th post-warmup draw.
    pub thin: usize,
    pub precondition_momentum: f64,
    pub precondition_epsilon: f64,
}

impl SgldSchedule {
    pub fn new(epsilon0: f64, alpha: f64, iterations: usize, warmup: usize) -> Self {
        Self {
            epsilon0,
            alpha,
            iterations,
            warmup,
            thin: 1,
            precondition_momentum: 0.99,
            precondition_epsilon: 1e-8,
        }
    }

    pub fn step_size(&self, t: usize) -> f64 {
        self.epsilon0 / (1.0 + t as f64).powf(self.alpha)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon0 <= 0.0 || self.alpha < 0.0 {
            return Err(Error::InvalidParameter(
                "step size must be positive and decay nonnegative".into(),
            ));
        }
        if self.iterations > 0 && self.warmup >= self.iterations {
            return Err(Error::InvalidParameter(format!(
                "warmup {} must be smaller than the iteration count {}",
                self.warmup, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thin must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-coordinate preconditioner state.
#[derive(Debug, Clone, Default)]
pub struct SgldState {
    v: Vec<f64>,
}

impl SgldState {
    pub fn new(dim: usize) -> Self {
        Self { v: vec![0.0; dim] }
    }
}

/// One preconditioned Langevin step on a flat parameter block, clipping into
/// `clip` afterwards when provided. Fails on non-finite gradients.
pub fn sgld_step<R: Rng>(
    x: &mut [f64],
    state: &mut SgldState,
    grad: &[f64],
    schedule: &SgldSchedule,
    t: usize,
    rng: &mut R,
    clip: Option<(f64, f64)>,
) -> Result<()> {
    sgld_step_scaled_noise(x, state, grad, schedule, t, rng, clip, 1.0)
}

/// [`sgld_step`] with the injected noise scaled by `noise_scale`; zero turns
/// the kernel into plain preconditioned gradient ascent (test hook).
#[allow(clippy::too_many_arguments)]
pub fn sgld_step_scaled_noise<R: Rng>(
    x: &mut [f64],
    state: &mut SgldState,
    grad: &[f64],
    schedule: &SgldSchedule,
    t: usize,
    rng: &mut R,
    clip: Option<(f64, f64)>,
    noise_scale: f64,
) -> Result<()> {
    assert_eq!(x.len(), grad.len(), "gradient shape mismatch");
    assert_eq!(x.len(), state.v.len(), "preconditioner shape mismatch");
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidParameter(
            "non-finite gradient in SGLD step".into(),
        ));
    }
    let eps = schedule.step_size(t);
    let momentum = schedule.precondition_momentum;
    for i in 0..x.len() {
        let g = grad[i];
        state.v[i] = momentum * state.v[i] + (1.0 - momentum) * g * g;
        let precond = 1.0 / (state.v[i].sqrt() + schedule.precondition_epsilon);
        let noise: f64 = rng.sample(StandardNormal);
        x[i] += 0.5 * eps * precond * g + noise_scale * (eps * precond).sqrt() * noise;
        if let Some((lo, hi)) = clip {
            x[i] = x[i].clamp(lo, hi);
        }
    }
    Ok(())
}
