//! Policy posterior sampling: SGLD on per-seat softmax logits.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::game::JointPolicy;
use crate::linalg::softmax_rows;
use crate::rng::{substream, Stream};

use super::priors::PriorConfig;
use super::sgld::{sgld_step, SgldSchedule, SgldState};
use super::{action_counts, GroupDemos};

/// Post-warmup joint-policy draws for one group.
#[derive(Debug, Clone)]
pub struct PolicyChainSamples {
    pub group: crate::rewards::GroupSpec,
    pub samples: Vec<JointPolicy>,
}

/// Sample the policy posterior of one group's demonstrations.
///
/// The target is `log P(theta) + sum_tau sum_(s,a) log pi_theta(a | s)`,
/// which factorises over seats; the likelihood gradient is the exact
/// count-based softmax gradient `counts - visits * pi`. Seat streams are
/// keyed by the owning agent's tag so relabelled reruns reproduce draws.
#[allow(clippy::too_many_arguments)]
pub fn policy_posterior_chain(
    demos: &GroupDemos,
    num_states: usize,
    num_actions: usize,
    prior: &PriorConfig,
    schedule: &SgldSchedule,
    master_seed: u64,
    group_tag: u64,
    seat_tags: &[u64],
) -> Result<PolicyChainSamples> {
    if demos.trajectories.is_empty() {
        return Err(Error::MissingInput(format!(
            "no demonstrations for group {:?}",
            demos.group.members()
        )));
    }
    schedule.validate()?;
    let n = demos.group.len();
    if seat_tags.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected {n} seat tags, got {}",
            seat_tags.len()
        )));
    }
    let (counts, visits) = action_counts(demos, num_states, num_actions);

    let mut logits = Vec::with_capacity(n);
    for &tag in seat_tags {
        let mut init = Array2::<f64>::zeros((num_states, num_actions));
        if let Some(sigma) = prior.policy_sigma {
            let mut rng = substream(master_seed, Stream::PolicyInit, &[group_tag, tag]);
            init.mapv_inplace(|_| {
                sigma * rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal)
            });
        }
        logits.push(init);
    }
    let mut states: Vec<SgldState> = (0..n)
        .map(|_| SgldState::new(num_states * num_actions))
        .collect();

    let mut samples = Vec::new();
    for t in 0..schedule.iterations {
        for seat in 0..n {
            let pi = softmax_rows(&logits[seat]);
            let mut grad = Array2::<f64>::zeros((num_states, num_actions));
            for s in 0..num_states {
                for a in 0..num_actions {
                    grad[[s, a]] = counts[seat][[s, a]] - visits[s] * pi[[s, a]];
                }
            }
            if let Some(sigma) = prior.policy_sigma {
                grad.scaled_add(-1.0 / (sigma * sigma), &logits[seat]);
            }
            let mut rng = substream(
                master_seed,
                Stream::PolicyNoise,
                &[group_tag, seat_tags[seat], t as u64],
            );
            sgld_step(
                logits[seat].as_slice_mut().expect("row-major layout"),
                &mut states[seat],
                grad.as_slice().expect("row-major layout"),
                schedule,
                t,
                &mut rng,
                None,
            )
            .map_err(|e| Error::ChainAborted {
                step: t,
                reason: e.to_string(),
            })?;
        }
        if t >= schedule.warmup && (t - schedule.warmup) % schedule.thin == 0 {
            let seats: Vec<Array2<f64>> = logits.iter().map(softmax_rows).collect();
            samples.push(JointPolicy::new(seats)?);
        }
    }
    Ok(PolicyChainSamples {
        group: demos.group.clone(),
        samples,
    })
}
