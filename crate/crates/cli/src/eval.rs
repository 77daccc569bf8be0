//! Success-rate sweeps over velocity ratios with trajectory logging.

use std::io::Write;
use std::path::{Path, PathBuf};

use pursuit_core::env::EnvConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Strategy};
use crate::error::{CliError, Result};
use crate::rollout::{run_episode, TeamPolicy};
use crate::tables::{read_table_file, sig9, TableWriter, TRAJECTORY_HEADER};
use crate::train::Checkpoint;

pub const SUCCESS_FILE: &str = "success.csv";
pub const TRAJECTORY_FILE: &str = "trajectories.csv";
pub const SUCCESS_HEADER: &str = "strategy,ratio,episodes,captures,success_rate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessRow {
    pub strategy: String,
    pub ratio: f64,
    pub episodes: usize,
    pub captures: usize,
    pub success_rate: f64,
}

impl SuccessRow {
    pub fn fields(&self) -> [String; 5] {
        [
            self.strategy.clone(),
            sig9(self.ratio),
            self.episodes.to_string(),
            self.captures.to_string(),
            sig9(self.success_rate),
        ]
    }
}

pub fn write_success(path: &Path, rows: &[SuccessRow]) -> Result<()> {
    let mut w = TableWriter::create(path, SUCCESS_HEADER)?;
    for r in rows {
        w.row(r.fields())?;
    }
    w.finish()?.flush()?;
    Ok(())
}

pub fn read_success(path: &Path) -> Result<Vec<SuccessRow>> {
    read_table_file(path, SUCCESS_HEADER)
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub strategy: Strategy,
    /// Trained learners, required for the learned strategies.
    pub checkpoint: Option<PathBuf>,
    pub ratios: Vec<f64>,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    /// Skip writing the per-step trajectory log.
    pub skip_trajectories: bool,
}

impl EvalOptions {
    pub fn from_config(config: &ExperimentConfig, strategy: Strategy) -> Self {
        Self {
            strategy,
            checkpoint: None,
            ratios: config.metrics.eval_ratios.clone(),
            episodes: config.metrics.eval_episodes,
            seeds: config.metrics.eval_seeds.clone(),
            skip_trajectories: false,
        }
    }
}

/// Independent generators for the environment and the policy at one
/// `(seed, ratio)` sweep point.
fn sweep_rngs(seed: u64, ratio_index: usize) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut env_rng = ChaCha8Rng::seed_from_u64(seed);
    env_rng.set_stream(2 * ratio_index as u64);
    let mut policy_rng = ChaCha8Rng::seed_from_u64(seed);
    policy_rng.set_stream(2 * ratio_index as u64 + 1);
    (env_rng, policy_rng)
}

/// Runs frozen policies across the ratio sweep. Writes `success.csv` and
/// `trajectories.csv` into the configured output directory.
pub fn eval(config: &ExperimentConfig, opts: &EvalOptions) -> Result<Vec<SuccessRow>> {
    config.validate()?;
    if opts.episodes == 0 || opts.ratios.is_empty() || opts.seeds.is_empty() {
        return Err(CliError::Usage("need at least one ratio, seed and episode".into()));
    }
    let checkpoint = match (&opts.checkpoint, opts.strategy.is_learned()) {
        (Some(p), true) => Some(Checkpoint::load(p)?),
        (None, true) => {
            return Err(CliError::Usage(format!(
                "strategy `{}` needs --checkpoint",
                opts.strategy.name()
            )))
        }
        (_, false) => None,
    };
    let policy = match (&checkpoint, opts.strategy) {
        (Some(c), s) => {
            if c.learners.len() != config.env.n_pursuers {
                return Err(CliError::Usage(format!(
                    "checkpoint has {} learners but env.n_pursuers is {}",
                    c.learners.len(),
                    config.env.n_pursuers
                )));
            }
            TeamPolicy::Learned {
                learners: &c.learners,
                mode: s.observation_mode(),
            }
        }
        (None, Strategy::Greedy) => TeamPolicy::Greedy,
        (None, Strategy::Pincer) => TeamPolicy::Pincer {
            k: config.pursuit.pincer_k,
        },
        (None, _) => TeamPolicy::Random,
    };

    let out = &config.run.out_dir;
    std::fs::create_dir_all(out)?;
    let mut log = if opts.skip_trajectories {
        None
    } else {
        Some(TableWriter::create(&out.join(TRAJECTORY_FILE), TRAJECTORY_HEADER)?)
    };
    let mut rows = Vec::new();
    let mut episode = 0u64;
    for (ri, &ratio) in opts.ratios.iter().enumerate() {
        let env_config = EnvConfig {
            velocity_ratio: ratio,
            ..config.env.clone()
        };
        let mut captures = 0;
        for &seed in &opts.seeds {
            let (mut env_rng, mut policy_rng) = sweep_rngs(seed, ri);
            for _ in 0..opts.episodes {
                let result = run_episode(&env_config, &policy, episode, &mut env_rng, &mut policy_rng, |row| {
                    match log.as_mut() {
                        Some(w) => w.row(row.fields()),
                        None => Ok(()),
                    }
                })?;
                captures += usize::from(result.captured);
                episode += 1;
            }
        }
        let episodes = opts.episodes * opts.seeds.len();
        rows.push(SuccessRow {
            strategy: opts.strategy.name().into(),
            ratio,
            episodes,
            captures,
            success_rate: captures as f64 / episodes as f64,
        });
    }
    if let Some(w) = log {
        w.finish()?.flush()?;
    }
    write_success(&out.join(SUCCESS_FILE), &rows)?;
    Ok(rows)
}
