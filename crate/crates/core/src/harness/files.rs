//! Persistent artifact formats: game tensors, profiles, demonstrations,
//! chain records, and reports.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{RewardlessGame, Trajectory};
use crate::inference::{DemonstrationSet, GroupDemos, RewardChainSamples};
use crate::rewards::{AgentRewardParams, AltruismProfile, GroupSpec, ParamBounds};

/// On-disk form of a rewardless game: nested `[S][A^n][S]` transition array
/// with the documented lexicographic joint-action order (seat 0
/// slowest-varying).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameFile {
    pub num_states: usize,
    pub num_actions: usize,
    pub num_players: usize,
    pub discount: f64,
    pub initial_dist: Vec<f64>,
    pub transition: Vec<Vec<Vec<f64>>>,
}

impl GameFile {
    pub fn from_game(game: &RewardlessGame) -> Self {
        let j = game.num_joint_actions();
        let transition = (0..game.num_states)
            .map(|s| {
                (0..j)
                    .map(|a| game.transition.slice(ndarray::s![s, a, ..]).to_vec())
                    .collect()
            })
            .collect();
        Self {
            num_states: game.num_states,
            num_actions: game.num_actions,
            num_players: game.num_players,
            discount: game.discount,
            initial_dist: game.initial_dist.to_vec(),
            transition,
        }
    }

    pub fn into_game(self) -> Result<RewardlessGame> {
        let j_count = self.num_actions.pow(self.num_players as u32);
        let mut tensor = Array3::<f64>::zeros((self.num_states, j_count, self.num_states));
        if self.transition.len() != self.num_states {
            return Err(Error::DimensionMismatch("transition outer length".into()));
        }
        for (s, per_action) in self.transition.iter().enumerate() {
            if per_action.len() != j_count {
                return Err(Error::DimensionMismatch(format!(
                    "state {s} has {} joint-action rows, expected {j_count}",
                    per_action.len()
                )));
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != self.num_states {
                    return Err(Error::DimensionMismatch(format!(
                        "row ({s}, {a}) has length {}",
                        row.len()
                    )));
                }
                for (sp, &p) in row.iter().enumerate() {
                    tensor[[s, a, sp]] = p;
                }
            }
        }
        RewardlessGame::new(
            self.num_states,
            self.num_actions,
            self.num_players,
            tensor,
            self.discount,
            Array1::from_vec(self.initial_dist),
        )
    }
}

/// One agent's ground-truth or estimated profile, in both materialised and
/// parameter form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub agent_id: usize,
    pub lambda: f64,
    pub intrinsic: Vec<Vec<f64>>,
    pub psi_lambda: f64,
    pub psi_r: Vec<Vec<f64>>,
}

impl ProfileRecord {
    pub fn from_profile(agent_id: usize, profile: &AltruismProfile, bounds: ParamBounds) -> Self {
        let params = AgentRewardParams::from_profile(profile, bounds);
        Self {
            agent_id,
            lambda: profile.altruism,
            intrinsic: matrix_to_rows(&profile.intrinsic),
            psi_lambda: params.psi_lambda,
            psi_r: matrix_to_rows(&params.psi_r),
        }
    }

    pub fn to_profile(&self) -> Result<AltruismProfile> {
        Ok(AltruismProfile {
            intrinsic: rows_to_matrix(&self.intrinsic)?,
            altruism: self.lambda,
        })
    }
}

fn matrix_to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    if rows.is_empty() {
        return Err(Error::DimensionMismatch("empty matrix".into()));
    }
    let cols = rows[0].len();
    let mut out = Array2::<f64>::zeros((rows.len(), cols));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::DimensionMismatch("ragged matrix".into()));
        }
        for (j, &v) in row.iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    Ok(out)
}

/// Point-estimate file: which method and summary produced the profiles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateFile {
    pub method: String,
    pub estimate: String,
    pub profiles: Vec<ProfileRecord>,
}

/// One demonstration line: a group's trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemoRecord {
    pub group: Vec<usize>,
    pub trajectory_index: usize,
    pub steps: Vec<(usize, Vec<usize>)>,
}

/// One retained chain draw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainRecord {
    pub step: usize,
    pub beta_samples: Vec<f64>,
    pub psi: Vec<ChainAgentRecord>,
    pub diagnostics: ChainDiagnostics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainAgentRecord {
    pub agent_id: usize,
    pub psi_lambda: f64,
    pub psi_r: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    /// Per-group gap value (PORP) or log-likelihood (DRP).
    pub per_group: Vec<f64>,
    pub log_prior: f64,
    pub log_posterior: f64,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, value)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| {
        Error::MissingInput(format!("{}: {e}", path.display()))
    })?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

pub fn write_demos(path: &Path, demos: &DemonstrationSet) -> Result<()> {
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    for group in &demos.groups {
        for (idx, traj) in group.trajectories.iter().enumerate() {
            let record = DemoRecord {
                group: group.group.members().to_vec(),
                trajectory_index: idx,
                steps: traj.steps.clone(),
            };
            serde_json::to_writer(&mut writer, &record)?;
            writer.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn read_demos(path: &Path) -> Result<DemonstrationSet> {
    let file = File::open(path).map_err(|e| {
        Error::MissingInput(format!("{}: {e}", path.display()))
    })?;
    let reader = BufReader::new(file);
    let mut groups: Vec<GroupDemos> = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DemoRecord = serde_json::from_str(&line)?;
        let members = record.group.clone();
        let traj = Trajectory {
            steps: record.steps,
        };
        match groups
            .iter_mut()
            .find(|g| g.group.members() == members.as_slice())
        {
            Some(g) => g.trajectories.push(traj),
            None => groups.push(GroupDemos {
                group: GroupSpec::new(members)?,
                trajectories: vec![traj],
            }),
        }
    }
    if groups.is_empty() {
        return Err(Error::MissingInput(format!(
            "no demonstrations in {}",
            path.display()
        )));
    }
    Ok(DemonstrationSet { groups })
}

pub fn write_chain(path: &Path, chain: &RewardChainSamples) -> Result<()> {
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    for draw in &chain.draws {
        let record = ChainRecord {
            step: draw.step,
            beta_samples: draw.beta_samples.clone(),
            psi: draw
                .params
                .iter()
                .enumerate()
                .map(|(agent_id, p)| ChainAgentRecord {
                    agent_id,
                    psi_lambda: p.psi_lambda,
                    psi_r: matrix_to_rows(&p.psi_r),
                })
                .collect(),
            diagnostics: ChainDiagnostics {
                per_group: draw.group_diagnostics.clone(),
                log_prior: draw.log_prior,
                log_posterior: draw.log_posterior,
            },
        };
        serde_json::to_writer(&mut writer, &record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Write profile records for a full agent set.
pub fn profiles_to_records(profiles: &[AltruismProfile], bounds: ParamBounds) -> Vec<ProfileRecord> {
    profiles
        .iter()
        .enumerate()
        .map(|(id, p)| ProfileRecord::from_profile(id, p, bounds))
        .collect()
}

/// Read profile records back into an agent-indexed profile list.
pub fn records_to_profiles(records: &[ProfileRecord]) -> Result<Vec<AltruismProfile>> {
    let mut out: Vec<Option<AltruismProfile>> = vec![None; records.len()];
    for record in records {
        if record.agent_id >= out.len() {
            return Err(Error::DimensionMismatch(format!(
                "agent id {} out of range",
                record.agent_id
            )));
        }
        out[record.agent_id] = Some(record.to_profile()?);
    }
    out.into_iter()
        .enumerate()
        .map(|(i, p)| p.ok_or_else(|| Error::MissingInput(format!("no profile for agent {i}"))))
        .collect()
}
