//! The experiment commands: generate environments and demonstrations, run
//! inference, and emit evaluation artifacts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use crate::diagnostics::{
    check_rank_condition, estimate_partition, evaluate_profiles, policy_kl, synthesize_partner,
    RankReport,
};
use crate::envs::{
    build_kitchen, chef_intrinsic_reward, generate_random_mg, KitchenCodec, KitchenLayout,
};
use crate::error::{Error, Result};
use crate::game::{sample_trajectory, solve_qre, JointPolicy, RewardlessGame};
use crate::gaps::{framed_profiles, identity_frames, GapKind, SeatFrames};
use crate::inference::{
    drp_chain, policy_posterior_chain, porp_reward_chain, posterior_point_estimate, ChainKeys,
    DemonstrationSet, DrpConfig, GroupDemos, PointEstimate, PorpConfig, RewardChainSamples,
};
use crate::rewards::{compose_effective, AltruismProfile, GroupSpec};
use crate::rng::{substream, Stream};

use super::config::{split_budget, EnvironmentSpec, ExperimentConfig, Method};
use super::files::{
    profiles_to_records, read_demos, read_json, records_to_profiles, write_chain, write_demos,
    write_json, EstimateFile, GameFile, ProfileRecord,
};

pub const GAME_FILE: &str = "game.json";
pub const PROFILES_FILE: &str = "profiles.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DEMOS_FILE: &str = "demos.jsonl";
pub const CHAIN_FILE: &str = "chain.jsonl";
pub const ESTIMATE_FILE: &str = "estimate.json";
/// Wall-clock metadata; inherently non-deterministic, so reproducibility
/// checks should skip it.
pub const INFER_META_FILE: &str = "infer_meta.json";
pub const ERROR_REPORT_FILE: &str = "error_report.json";
pub const RANK_REPORT_FILE: &str = "rank_report.json";
pub const Z_STUDY_FILE: &str = "z_study.csv";
pub const IMITATE_FILE: &str = "imitate.csv";

/// An environment instantiated from the configuration: the game, the
/// ground-truth profiles, the selected groups, and per-group seat frames
/// (the kitchen's swap relabeling for seat 1; identity elsewhere).
pub struct BuiltEnv {
    pub game: RewardlessGame,
    pub truth: Vec<AltruismProfile>,
    pub groups: Vec<GroupSpec>,
    pub frames: Vec<SeatFrames>,
    pub codec: Option<KitchenCodec>,
}

/// Instantiate the configured environment deterministically. The master seed
/// governs all environment randomness (any seed inside the environment spec
/// is overridden).
pub fn build_environment(config: &ExperimentConfig) -> Result<BuiltEnv> {
    let num_agents = config.environment.num_agents();
    let num_players = config.environment.num_players();
    match &config.environment {
        EnvironmentSpec::RandomMg(rmg) => {
            let mut rmg = *rmg;
            rmg.seed = config.seed;
            let (game, truth) = generate_random_mg(&rmg)?;
            let groups = config.groups.resolve(num_agents, num_players)?;
            let frames = groups
                .iter()
                .map(|g| identity_frames(g.len()))
                .collect();
            Ok(BuiltEnv {
                game,
                truth,
                groups,
                frames,
                codec: None,
            })
        }
        EnvironmentSpec::Kitchen {
            layout,
            discount,
            chef_tasks,
            truth_lambda_range,
        } => {
            if chef_tasks.len() < 2 {
                return Err(Error::InvalidParameter(
                    "the kitchen needs at least two chefs".into(),
                ));
            }
            let layout = KitchenLayout::parse(&layout.join("\n"))?;
            let (game, codec) = build_kitchen(&layout, *discount)?;
            let truth = chef_tasks
                .iter()
                .enumerate()
                .map(|(agent, &task)| {
                    let mut rng = substream(config.seed, Stream::EnvLambda, &[agent as u64]);
                    let lambda = rand::Rng::gen_range(
                        &mut rng,
                        truth_lambda_range.0..truth_lambda_range.1.max(truth_lambda_range.0 + 1e-12),
                    );
                    AltruismProfile {
                        intrinsic: chef_intrinsic_reward(&codec, task),
                        altruism: lambda,
                    }
                })
                .collect();
            let groups = config.groups.resolve(num_agents, 2)?;
            let swap = codec.swap_frame();
            let frames = groups
                .iter()
                .map(|_| vec![None, Some(swap.clone())])
                .collect();
            Ok(BuiltEnv {
                game,
                truth,
                groups,
                frames,
                codec: Some(codec),
            })
        }
    }
}

fn ensure_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

/// Write the game tensor, ground-truth profiles, and a manifest.
pub fn cmd_gen_env(config: &ExperimentConfig, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let env = build_environment(config)?;
    write_json(&out.join(GAME_FILE), &GameFile::from_game(&env.game))?;
    write_json(
        &out.join(PROFILES_FILE),
        &profiles_to_records(&env.truth, config.bounds),
    )?;
    let manifest = json!({
        "seed": config.seed,
        "environment": match &config.environment {
            EnvironmentSpec::RandomMg(_) => "random_mg",
            EnvironmentSpec::Kitchen { .. } => "kitchen",
        },
        "num_states": env.game.num_states,
        "num_actions": env.game.num_actions,
        "num_players": env.game.num_players,
        "num_agents": env.truth.len(),
        "groups": env.groups.iter().map(|g| g.members().to_vec()).collect::<Vec<_>>(),
        "layout": match &config.environment {
            EnvironmentSpec::Kitchen { layout, .. } => Some(layout.clone()),
            _ => None,
        },
        "config": config.canonical(),
    });
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(())
}

/// Ground-truth equilibrium policies, one per group.
pub fn truth_equilibria(
    config: &ExperimentConfig,
    env: &BuiltEnv,
) -> Result<Vec<JointPolicy>> {
    let beta = config.beta_true_resolved();
    let solver = config.solver;
    let results: Vec<Result<JointPolicy>> = env
        .groups
        .par_iter()
        .enumerate()
        .map(|(g, group)| {
            let framed = framed_profiles(&env.truth, group, &env.frames[g]);
            let reward = compose_effective(&framed, group, env.game.joint_actions())?;
            let solution = solve_qre(&env.game, &reward, beta, &solver)?;
            if !solution.converged {
                return Err(Error::NoConvergence(format!(
                    "group {:?} equilibrium residual {}",
                    group.members(),
                    solution.residual
                )));
            }
            Ok(solution.policy)
        })
        .collect();
    results.into_iter().collect()
}

/// Sample each group's demonstration share from its ground-truth QRE.
pub fn cmd_gen_demos(config: &ExperimentConfig, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    // Environment and profiles must exist; the game itself is rebuilt
    // deterministically (the kitchen additionally needs its codec, which the
    // JSON tensor does not carry).
    let _: Vec<ProfileRecord> = read_json(&out.join(PROFILES_FILE))?;
    let env = build_environment(config)?;
    let policies = truth_equilibria(config, &env)?;
    let counts = split_budget(config.demos.total_trajectories, env.groups.len());
    let mut groups = Vec::with_capacity(env.groups.len());
    for (g, group) in env.groups.iter().enumerate() {
        let mut trajectories = Vec::with_capacity(counts[g]);
        for idx in 0..counts[g] {
            let mut rng = substream(
                config.seed,
                Stream::DemoTrajectory,
                &[g as u64, idx as u64],
            );
            trajectories.push(sample_trajectory(
                &env.game,
                &policies[g],
                config.demos.length,
                &mut rng,
            )?);
        }
        groups.push(GroupDemos {
            group: group.clone(),
            trajectories,
        });
    }
    write_demos(&out.join(DEMOS_FILE), &DemonstrationSet { groups })
}

/// Run the configured sampler over the demonstrations on disk; writes the
/// chain, the point estimate, and timing metadata.
pub fn cmd_infer(config: &ExperimentConfig, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let demos = read_demos(&out.join(DEMOS_FILE))?;
    let env = build_environment(config)?;
    let started = Instant::now();
    let chain = run_inference(config, &env, &demos)?;
    let wall = started.elapsed().as_secs_f64();

    write_chain(&out.join(CHAIN_FILE), &chain)?;
    let profiles = posterior_point_estimate(&chain, config.estimate)?;
    let estimate = EstimateFile {
        method: config.method.as_str().to_string(),
        estimate: match config.estimate {
            PointEstimate::Mean => "mean".to_string(),
            PointEstimate::Map => "map".to_string(),
        },
        profiles: profiles_to_records(&profiles, config.bounds),
    };
    write_json(&out.join(ESTIMATE_FILE), &estimate)?;
    write_json(
        &out.join(INFER_META_FILE),
        &json!({
            "method": config.method.as_str(),
            "wall_clock_seconds": wall,
            "retained_draws": chain.draws.len(),
            "groups": demos.groups.len(),
        }),
    )?;
    Ok(())
}

/// The inference stage shared by the CLI and in-process experiments.
pub fn run_inference(
    config: &ExperimentConfig,
    env: &BuiltEnv,
    demos: &DemonstrationSet,
) -> Result<RewardChainSamples> {
    let num_agents = env.truth.len();
    let keys = ChainKeys::new(config.seed, num_agents, demos.groups.len());
    // Frames follow the demo groups (they may differ from the config's group
    // selection when demos were generated under another selection).
    let frames: Vec<SeatFrames> = demos
        .groups
        .iter()
        .map(|g| match &env.codec {
            Some(codec) => {
                let mut f = identity_frames(g.group.len());
                if g.group.len() == 2 {
                    f[1] = Some(codec.swap_frame());
                }
                f
            }
            None => identity_frames(g.group.len()),
        })
        .collect();
    match config.method {
        Method::Drp => {
            let drp = DrpConfig {
                prior: config.prior_config(),
                schedule: config.reward_schedule(),
                bounds: config.bounds,
                qre: config.solver,
                unroll: config.unroll,
            };
            drp_chain(&env.game, demos, &frames, num_agents, &drp, &keys)
        }
        Method::PorpPsg | Method::PorpQig => {
            let prior = config.prior_config();
            let policy_schedule = config.policy_schedule();
            let samples: Vec<_> = demos
                .groups
                .par_iter()
                .enumerate()
                .map(|(g, group_demos)| {
                    let seat_tags: Vec<u64> = group_demos
                        .group
                        .members()
                        .iter()
                        .map(|&a| keys.agent_tags[a])
                        .collect();
                    policy_posterior_chain(
                        group_demos,
                        env.game.num_states,
                        env.game.num_actions,
                        &prior,
                        &policy_schedule,
                        config.seed,
                        keys.group_tags[g],
                        &seat_tags,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let porp = PorpConfig {
                gap: config.gap_config(),
                prior,
                schedule: config.reward_schedule(),
                bounds: config.bounds,
            };
            let groups: Vec<GroupSpec> =
                demos.groups.iter().map(|g| g.group.clone()).collect();
            porp_reward_chain(
                &env.game,
                &groups,
                &frames,
                &samples,
                num_agents,
                &porp,
                &keys,
            )
        }
    }
}

/// Compare the stored estimate against the ground truth.
pub fn cmd_evaluate(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let truth_records: Vec<ProfileRecord> = read_json(&out.join(PROFILES_FILE))?;
    let truth = records_to_profiles(&truth_records)?;
    let estimate_file: EstimateFile = read_json(&out.join(ESTIMATE_FILE))?;
    let estimate = records_to_profiles(&estimate_file.profiles)?;
    let report = evaluate_profiles(&estimate, &truth, config.bounds)?;
    write_json(&out.join(ERROR_REPORT_FILE), &report)
}

/// Rank-condition reports: for every agent observed in at least two groups,
/// check the first pair of groups containing it.
pub fn cmd_rank_check(config: &ExperimentConfig, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let env = build_environment(config)?;
    let policies = truth_equilibria(config, &env)?;
    let mut reports: Vec<RankReport> = Vec::new();
    for agent in 0..env.truth.len() {
        let containing: Vec<usize> = env
            .groups
            .iter()
            .enumerate()
            .filter(|(_, g)| g.contains(agent))
            .map(|(i, _)| i)
            .collect();
        if containing.len() < 2 {
            continue;
        }
        let (gi, gj) = (containing[0], containing[1]);
        let seat_i = env.groups[gi].seat_of(agent).expect("member");
        let seat_j = env.groups[gj].seat_of(agent).expect("member");
        let others_i = policies[gi].others(seat_i);
        let others_j = policies[gj].others(seat_j);
        let mut report = check_rank_condition(
            &env.game,
            (&others_i, seat_i),
            (&others_j, seat_j),
            env.game.discount,
        )?;
        report.agent = agent;
        report.groups = (
            env.groups[gi].members().to_vec(),
            env.groups[gj].members().to_vec(),
        );
        reports.push(report);
    }
    if reports.is_empty() {
        return Err(Error::InvalidParameter(
            "no agent is observed in two groups".into(),
        ));
    }
    write_json(&out.join(RANK_REPORT_FILE), &reports)
}

/// Partition-constant study: estimate `Z` across policies drawn from the
/// first group's policy posterior.
pub fn cmd_z_study(config: &ExperimentConfig, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let demos = read_demos(&out.join(DEMOS_FILE))?;
    let env = build_environment(config)?;
    let group_demos = &demos.groups[0];
    let prior = config.prior_config();
    let schedule = config.policy_schedule();
    let keys = ChainKeys::new(config.seed, env.truth.len(), demos.groups.len());
    let seat_tags: Vec<u64> = group_demos
        .group
        .members()
        .iter()
        .map(|&a| keys.agent_tags[a])
        .collect();
    let chain = policy_posterior_chain(
        group_demos,
        env.game.num_states,
        env.game.num_actions,
        &prior,
        &schedule,
        config.seed,
        keys.group_tags[0],
        &seat_tags,
    )?;
    let wanted = config.z_study.policies.min(chain.samples.len());
    let stride = (chain.samples.len() / wanted).max(1);
    let gap_cfg = config.gap_config();
    let beta = config.beta_true_resolved();
    let rows: Vec<(usize, f64)> = (0..wanted)
        .into_par_iter()
        .map(|i| {
            let policy = &chain.samples[i * stride];
            let mut rng = substream(config.seed, Stream::Proposal, &[i as u64]);
            let z = estimate_partition(
                &env.game,
                &env.truth,
                &group_demos.group,
                policy,
                &gap_cfg,
                beta,
                config.bounds,
                config.z_study.samples,
                config.z_study.proposal_variance,
                &mut rng,
            )?;
            Ok((i, z))
        })
        .collect::<Result<Vec<_>>>()?;
    let kind = match gap_cfg.kind {
        GapKind::Psg => "psg",
        GapKind::Qig => "qig",
    };
    let mut file = fs::File::create(out.join(Z_STUDY_FILE))?;
    writeln!(file, "policy_index,z_estimate,gap_kind")?;
    for (i, z) in rows {
        writeln!(file, "{i},{z},{kind}")?;
    }
    Ok(())
}

/// Altruism-imitation sweep: synthesise a partner at each target level from
/// both the oracle (ground-truth rewards) and the stored estimate, and
/// record the chef's value plus the policy divergence from the oracle.
pub fn cmd_imitate(config: &ExperimentConfig, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let env = build_environment(config)?;
    if env.game.num_players != 2 {
        return Err(Error::InvalidParameter(
            "partner synthesis needs a two-player game".into(),
        ));
    }
    let estimate_file: EstimateFile = read_json(&out.join(ESTIMATE_FILE))?;
    let estimate = records_to_profiles(&estimate_file.profiles)?;

    let group = match &config.imitate.group {
        Some(members) => GroupSpec::new(members.clone())?,
        None => env.groups[0].clone(),
    };
    let ai_agent = config.imitate.ai_agent.unwrap_or(group.members()[0]);
    let chef_agent = *group
        .members()
        .iter()
        .find(|&&a| a != ai_agent)
        .ok_or_else(|| Error::InvalidParameter("degenerate imitation group".into()))?;
    let frames = match &env.codec {
        Some(codec) => vec![None, Some(codec.swap_frame())],
        None => identity_frames(2),
    };
    let beta = config.beta_true_resolved();

    let mut rows = Vec::new();
    for &target in &config.imitate.targets {
        let oracle = synthesize_partner(
            &env.game,
            &env.truth,
            &group,
            ai_agent,
            target,
            &env.truth[chef_agent],
            beta,
            &config.solver,
            &frames,
        )?;
        let synthesized = synthesize_partner(
            &env.game,
            &estimate,
            &group,
            ai_agent,
            target,
            &env.truth[chef_agent],
            beta,
            &config.solver,
            &frames,
        )?;
        rows.push((target, oracle.chef_value, 0.0, "oracle".to_string()));
        rows.push((
            target,
            synthesized.chef_value,
            policy_kl(&oracle.joint, &synthesized.joint)?,
            config.method.as_str().to_string(),
        ));
    }
    let mut file = fs::File::create(out.join(IMITATE_FILE))?;
    writeln!(file, "target_lambda,chef_value,kl_to_oracle,method")?;
    for (target, value, kl, method) in rows {
        writeln!(file, "{target},{value},{kl},{method}")?;
    }
    Ok(())
}

/// Run the full pipeline (environment, demonstrations, inference,
/// evaluation) into one directory.
pub fn run_pipeline(config: &ExperimentConfig, out: &Path) -> Result<()> {
    cmd_gen_env(config, out)?;
    cmd_gen_demos(config, out)?;
    cmd_infer(config, out)?;
    cmd_evaluate(config, out)
}

/// Resolve the output directory from an override or the config.
pub fn resolve_out_dir(config: &ExperimentConfig, cli_out: Option<&str>) -> Result<PathBuf> {
    match cli_out.or(config.out_dir.as_deref()) {
        Some(dir) => Ok(PathBuf::from(dir)),
        None => Err(Error::InvalidParameter(
            "no output directory: set out_dir in the config or pass --out".into(),
        )),
    }
}
