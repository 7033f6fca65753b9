//! Experiment configuration: one JSON document whose unset fields resolve to
//! the benchmark defaults for the chosen method and environment.

use serde::{Deserialize, Serialize};

use crate::envs::{ChefTask, RandomMgConfig};
use crate::error::{Error, Result};
use crate::game::QreConfig;
use crate::inference::PointEstimate;
use crate::rewards::{GroupSpec, ParamBounds};

/// Inference method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Drp,
    PorpPsg,
    PorpQig,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Drp => "drp",
            Method::PorpPsg => "porp_psg",
            Method::PorpQig => "porp_qig",
        }
    }
}

/// Which environment the experiment runs on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentSpec {
    RandomMg(RandomMgConfig),
    Kitchen {
        /// ASCII grid rows (see the layout parser for the tile alphabet).
        layout: Vec<String>,
        #[serde(default = "default_kitchen_discount")]
        discount: f64,
        /// One task per chef; the chef count is the agent count.
        chef_tasks: Vec<ChefTask>,
        /// Ground-truth altruism levels are sampled uniformly from here.
        #[serde(default = "default_kitchen_lambda_range")]
        truth_lambda_range: (f64, f64),
    },
}

fn default_kitchen_discount() -> f64 {
    0.9
}

fn default_kitchen_lambda_range() -> (f64, f64) {
    (-0.25, 0.0)
}

impl EnvironmentSpec {
    pub fn is_kitchen(&self) -> bool {
        matches!(self, EnvironmentSpec::Kitchen { .. })
    }

    pub fn num_agents(&self) -> usize {
        match self {
            EnvironmentSpec::RandomMg(cfg) => cfg.num_agents,
            EnvironmentSpec::Kitchen { chef_tasks, .. } => chef_tasks.len(),
        }
    }

    pub fn num_players(&self) -> usize {
        match self {
            EnvironmentSpec::RandomMg(cfg) => cfg.num_players,
            EnvironmentSpec::Kitchen { .. } => 2,
        }
    }
}

/// Group selection: `"all"`, `{"first": k}`, or an explicit member list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupSelection {
    Named(String),
    First { first: usize },
    Explicit(Vec<Vec<usize>>),
}

impl Default for GroupSelection {
    fn default() -> Self {
        GroupSelection::Named("all".into())
    }
}

fn combinations(m: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n);
    fn rec(start: usize, m: usize, n: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == n {
            out.push(current.clone());
            return;
        }
        for i in start..m {
            current.push(i);
            rec(i + 1, m, n, current, out);
            current.pop();
        }
    }
    rec(0, m, n, &mut current, &mut out);
    out
}

impl GroupSelection {
    pub fn resolve(&self, num_agents: usize, group_size: usize) -> Result<Vec<GroupSpec>> {
        let all = combinations(num_agents, group_size);
        let lists = match self {
            GroupSelection::Named(name) if name == "all" => all,
            GroupSelection::Named(other) => {
                return Err(Error::InvalidParameter(format!(
                    "unknown group selection '{other}' (expected \"all\")"
                )));
            }
            GroupSelection::First { first } => {
                if *first == 0 || *first > all.len() {
                    return Err(Error::InvalidParameter(format!(
                        "cannot take the first {first} of {} groups",
                        all.len()
                    )));
                }
                all.into_iter().take(*first).collect()
            }
            GroupSelection::Explicit(lists) => lists.clone(),
        };
        let mut groups = Vec::with_capacity(lists.len());
        for members in lists {
            if members.len() != group_size {
                return Err(Error::InvalidParameter(format!(
                    "group {members:?} does not have {group_size} members"
                )));
            }
            if members.iter().any(|&a| a >= num_agents) {
                return Err(Error::InvalidParameter(format!(
                    "group {members:?} references an agent outside 0..{num_agents}"
                )));
            }
            groups.push(GroupSpec::new(members)?);
        }
        if groups.is_empty() {
            return Err(Error::InvalidParameter("no groups selected".into()));
        }
        Ok(groups)
    }
}

/// Demonstration budget, split as evenly as possible across groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemoConfig {
    pub total_trajectories: usize,
    #[serde(default = "default_demo_length")]
    pub length: usize,
}

fn default_demo_length() -> usize {
    1_000
}

/// Per-group trajectory counts differing by at most one, earlier groups
/// taking the remainder.
pub fn split_budget(total: usize, num_groups: usize) -> Vec<usize> {
    let base = total / num_groups;
    let extra = total % num_groups;
    (0..num_groups)
        .map(|g| base + usize::from(g < extra))
        .collect()
}

/// SGLD settings with optional fields that fall back to the benchmark
/// defaults for the method/environment pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct SgldSettings {
    pub epsilon0: Option<f64>,
    pub alpha: Option<f64>,
    pub iterations: Option<usize>,
    pub warmup: Option<usize>,
    pub thin: Option<usize>,
}

/// Prior settings with optional fields resolved per method/environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct PriorSettings {
    pub reward_sigma: Option<f64>,
    /// `"auto"` picks the benchmark default, `"flat"` disables the policy
    /// prior, a number sets the Gaussian std-dev.
    #[serde(default)]
    pub policy_sigma: SigmaSetting,
    pub beta_rate: Option<f64>,
    pub beta_min: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSetting {
    Keyword(SigmaKeyword),
    Fixed(f64),
}

impl Default for SigmaSetting {
    fn default() -> Self {
        SigmaSetting::Keyword(SigmaKeyword::Auto)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaKeyword {
    Auto,
    Flat,
}

/// Partition-constant study settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZStudyConfig {
    pub policies: usize,
    pub samples: usize,
    pub proposal_variance: f64,
}

impl Default for ZStudyConfig {
    fn default() -> Self {
        Self {
            policies: 50,
            samples: 20_000,
            proposal_variance: 0.16,
        }
    }
}

/// Altruism-imitation sweep settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImitateConfig {
    /// Group to synthesise in; defaults to the first selected group.
    pub group: Option<Vec<usize>>,
    /// Member replaced by the synthesised partner; defaults to the group's
    /// first member.
    pub ai_agent: Option<usize>,
    pub targets: Vec<f64>,
}

impl Default for ImitateConfig {
    fn default() -> Self {
        Self {
            group: None,
            ai_agent: None,
            // Eleven evenly spaced levels from adversarial to strongly
            // prosocial.
            targets: (0..11).map(|i| (3 * i - 10) as f64 / 10.0).collect(),
        }
    }
}

/// The experiment configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub groups: GroupSelection,
    pub demos: DemoConfig,
    /// Entropy parameter used to generate ground-truth demonstrations;
    /// defaults to the environment's benchmark value.
    pub beta_true: Option<f64>,
    pub method: Method,
    #[serde(default)]
    pub bounds: ParamBounds,
    #[serde(default)]
    pub priors: PriorSettings,
    #[serde(default)]
    pub sgld_policy: SgldSettings,
    #[serde(default)]
    pub sgld_reward: SgldSettings,
    pub gap_concentration: Option<f64>,
    #[serde(default)]
    pub solver: QreConfig,
    #[serde(default = "default_unroll")]
    pub unroll: usize,
    #[serde(default = "default_estimate")]
    pub estimate: PointEstimate,
    #[serde(default)]
    pub z_study: ZStudyConfig,
    #[serde(default)]
    pub imitate: ImitateConfig,
    #[serde(default)]
    pub seed: u64,
    pub out_dir: Option<String>,
}

fn default_unroll() -> usize {
    50
}

fn default_estimate() -> PointEstimate {
    PointEstimate::Mean
}

impl ExperimentConfig {
    /// Fill every optional field with the benchmark default for the chosen
    /// method and environment, producing a canonical document.
    pub fn canonical(&self) -> ExperimentConfig {
        let kitchen = self.environment.is_kitchen();
        let mut out = self.clone();
        out.beta_true = Some(
            self.beta_true
                .unwrap_or(if kitchen { 0.05 } else { 0.1 }),
        );
        out.priors.reward_sigma = Some(self.priors.reward_sigma.unwrap_or(match self.method {
            Method::Drp => 1.0 / 40.0,
            _ => 1.0 / 6.0,
        }));
        out.priors.policy_sigma = match self.priors.policy_sigma {
            SigmaSetting::Keyword(SigmaKeyword::Auto) => {
                if kitchen {
                    SigmaSetting::Fixed(1.0 / 40.0)
                } else {
                    SigmaSetting::Keyword(SigmaKeyword::Flat)
                }
            }
            other => other,
        };
        out.priors.beta_rate = Some(self.priors.beta_rate.unwrap_or(10.0));
        out.priors.beta_min = Some(
            self.priors
                .beta_min
                .unwrap_or(if kitchen { 0.03 } else { 0.05 }),
        );
        out.gap_concentration = Some(self.gap_concentration.unwrap_or(match self.method {
            Method::PorpQig => 50_000.0,
            _ => 500.0,
        }));
        out.sgld_policy.epsilon0 = Some(self.sgld_policy.epsilon0.unwrap_or(0.2));
        out.sgld_policy.alpha = Some(self.sgld_policy.alpha.unwrap_or(0.0));
        out.sgld_policy.iterations = Some(self.sgld_policy.iterations.unwrap_or(3_000));
        out.sgld_policy.warmup = Some(self.sgld_policy.warmup.unwrap_or(1_000));
        out.sgld_policy.thin = Some(self.sgld_policy.thin.unwrap_or(1));
        out.sgld_reward.epsilon0 = Some(self.sgld_reward.epsilon0.unwrap_or(match self.method {
            Method::Drp => 0.1,
            _ => {
                if kitchen {
                    5.0
                } else {
                    1.5
                }
            }
        }));
        out.sgld_reward.alpha = Some(self.sgld_reward.alpha.unwrap_or(match self.method {
            Method::Drp => 0.05,
            _ => 0.5,
        }));
        out.sgld_reward.iterations = Some(self.sgld_reward.iterations.unwrap_or(match self.method {
            Method::Drp => 800,
            _ => 4_000,
        }));
        out.sgld_reward.warmup = Some(self.sgld_reward.warmup.unwrap_or(match self.method {
            Method::Drp => 400,
            _ => 2_000,
        }));
        out.sgld_reward.thin = Some(self.sgld_reward.thin.unwrap_or(1));
        out
    }

    pub fn beta_true_resolved(&self) -> f64 {
        self.canonical().beta_true.expect("canonical fills beta")
    }

    /// Resolved priors as consumed by the samplers.
    pub fn prior_config(&self) -> crate::inference::PriorConfig {
        let canon = self.canonical();
        crate::inference::PriorConfig {
            reward_sigma: canon.priors.reward_sigma.expect("resolved"),
            policy_sigma: match canon.priors.policy_sigma {
                SigmaSetting::Fixed(v) => Some(v),
                _ => None,
            },
            beta_rate: canon.priors.beta_rate.expect("resolved"),
            beta_min: canon.priors.beta_min.expect("resolved"),
        }
    }

    pub fn policy_schedule(&self) -> crate::inference::SgldSchedule {
        let canon = self.canonical();
        let mut s = crate::inference::SgldSchedule::new(
            canon.sgld_policy.epsilon0.expect("resolved"),
            canon.sgld_policy.alpha.expect("resolved"),
            canon.sgld_policy.iterations.expect("resolved"),
            canon.sgld_policy.warmup.expect("resolved"),
        );
        s.thin = canon.sgld_policy.thin.expect("resolved");
        s
    }

    pub fn reward_schedule(&self) -> crate::inference::SgldSchedule {
        let canon = self.canonical();
        let mut s = crate::inference::SgldSchedule::new(
            canon.sgld_reward.epsilon0.expect("resolved"),
            canon.sgld_reward.alpha.expect("resolved"),
            canon.sgld_reward.iterations.expect("resolved"),
            canon.sgld_reward.warmup.expect("resolved"),
        );
        s.thin = canon.sgld_reward.thin.expect("resolved");
        s
    }

    pub fn gap_config(&self) -> crate::gaps::GapConfig {
        let canon = self.canonical();
        let c = canon.gap_concentration.expect("resolved");
        match self.method {
            Method::PorpQig => crate::gaps::GapConfig::qig(c),
            _ => crate::gaps::GapConfig::psg(c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::Sparsity;

    fn base_config() -> ExperimentConfig {
        ExperimentConfig {
            environment: EnvironmentSpec::RandomMg(RandomMgConfig {
                num_states: 4,
                num_actions: 2,
                num_players: 2,
                num_agents: 3,
                sparsity: Sparsity::Fraction(0.1),
                ..RandomMgConfig::default()
            }),
            groups: GroupSelection::default(),
            demos: DemoConfig {
                total_trajectories: 10,
                length: 50,
            },
            beta_true: None,
            method: Method::PorpPsg,
            bounds: ParamBounds::default(),
            priors: PriorSettings::default(),
            sgld_policy: SgldSettings::default(),
            sgld_reward: SgldSettings::default(),
            gap_concentration: None,
            solver: QreConfig::default(),
            unroll: 50,
            estimate: PointEstimate::Mean,
            z_study: ZStudyConfig::default(),
            imitate: ImitateConfig::default(),
            seed: 7,
            out_dir: None,
        }
    }

    #[test]
    fn bare_config_resolves_benchmark_defaults() {
        let canon = base_config().canonical();
        assert_eq!(canon.beta_true, Some(0.1));
        assert_eq!(canon.priors.reward_sigma, Some(1.0 / 6.0));
        assert_eq!(
            canon.priors.policy_sigma,
            SigmaSetting::Keyword(SigmaKeyword::Flat)
        );
        assert_eq!(canon.priors.beta_min, Some(0.05));
        assert_eq!(canon.gap_concentration, Some(500.0));
        assert_eq!(canon.sgld_reward.epsilon0, Some(1.5));
        assert_eq!(canon.sgld_reward.alpha, Some(0.5));
        assert_eq!(canon.sgld_policy.epsilon0, Some(0.2));
        assert_eq!(canon.sgld_policy.alpha, Some(0.0));

        let mut drp = base_config();
        drp.method = Method::Drp;
        let canon = drp.canonical();
        assert_eq!(canon.priors.reward_sigma, Some(1.0 / 40.0));
        assert_eq!(canon.sgld_reward.epsilon0, Some(0.1));
        assert_eq!(canon.sgld_reward.alpha, Some(0.05));

        let mut qig = base_config();
        qig.method = Method::PorpQig;
        assert_eq!(qig.canonical().gap_concentration, Some(50_000.0));

        let mut kitchen = base_config();
        kitchen.environment = EnvironmentSpec::Kitchen {
            layout: crate::envs::REFERENCE_LAYOUT.lines().map(String::from).collect(),
            discount: 0.9,
            chef_tasks: vec![ChefTask::Deliver, ChefTask::Both, ChefTask::Cook],
            truth_lambda_range: (-0.25, 0.0),
        };
        let canon = kitchen.canonical();
        assert_eq!(canon.beta_true, Some(0.05));
        assert_eq!(canon.priors.beta_min, Some(0.03));
        assert_eq!(canon.priors.policy_sigma, SigmaSetting::Fixed(1.0 / 40.0));
        assert_eq!(canon.sgld_reward.epsilon0, Some(5.0));
    }

    #[test]
    fn canonical_round_trips_through_json() {
        let canon = base_config().canonical();
        let text = serde_json::to_string_pretty(&canon).unwrap();
        let parsed: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed.canonical(), canon);
    }

    #[test]
    fn group_selection_modes() {
        let all = GroupSelection::Named("all".into()).resolve(4, 3).unwrap();
        assert_eq!(all.len(), 4); // C(4,3)
        assert_eq!(all[0].members(), &[0, 1, 2]);

        let first = GroupSelection::First { first: 2 }.resolve(4, 2).unwrap();
        assert_eq!(first.len(), 2);
        assert_eq!(first[1].members(), &[0, 2]);

        let explicit = GroupSelection::Explicit(vec![vec![0, 1], vec![2, 3]])
            .resolve(4, 2)
            .unwrap();
        assert_eq!(explicit[1].members(), &[2, 3]);

        assert!(GroupSelection::Explicit(vec![vec![0, 5]]).resolve(4, 2).is_err());
        assert!(GroupSelection::Named("some".into()).resolve(4, 2).is_err());
    }

    #[test]
    fn budget_split_is_even_within_one() {
        assert_eq!(split_budget(200, 4), vec![50, 50, 50, 50]);
        assert_eq!(split_budget(10, 3), vec![4, 3, 3]);
        assert_eq!(split_budget(2, 3), vec![1, 1, 0]);
        let split = split_budget(61, 3);
        assert_eq!(split.iter().sum::<usize>(), 61);
        assert!(split.iter().max().unwrap() - split.iter().min().unwrap() <= 1);
    }

    #[test]
    fn group_selection_parses_from_json_forms() {
        let a: GroupSelection = serde_json::from_str("\"all\"").unwrap();
        assert_eq!(a, GroupSelection::Named("all".into()));
        let f: GroupSelection = serde_json::from_str("{\"first\": 3}").unwrap();
        assert_eq!(f, GroupSelection::First { first: 3 });
        let e: GroupSelection = serde_json::from_str("[[0,1],[1,2]]").unwrap();
        assert_eq!(
            e,
            GroupSelection::Explicit(vec![vec![0, 1], vec![1, 2]])
        );
    }
}
