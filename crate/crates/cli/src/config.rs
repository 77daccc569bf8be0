//! Experiment configuration file.
//!
//! The file is JSON. Every section is optional and falls back to the
//! reference defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use pursuit_core::curriculum::{CurriculumArm, SessionPlan};
use pursuit_core::ddpg::DdpgConfig;
use pursuit_core::env::{EnvConfig, ObservationMode};
use pursuit_core::metrics::DEFAULT_HEADING_BINS;
use pursuit_core::pursuit::GreedyParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Greedy,
    Pincer,
    CdDdpg,
    CdDdpgPartial,
    Random,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Greedy => "greedy",
            Strategy::Pincer => "pincer",
            Strategy::CdDdpg => "cd_ddpg",
            Strategy::CdDdpgPartial => "cd_ddpg_partial",
            Strategy::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Strategy::Greedy,
            Strategy::Pincer,
            Strategy::CdDdpg,
            Strategy::CdDdpgPartial,
            Strategy::Random,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }

    pub fn is_learned(self) -> bool {
        matches!(self, Strategy::CdDdpg | Strategy::CdDdpgPartial)
    }

    pub fn observation_mode(self) -> ObservationMode {
        match self {
            Strategy::CdDdpgPartial => ObservationMode::Partial,
            _ => ObservationMode::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurriculumConfig {
    pub arm: CurriculumArm,
    /// Chained sessions and the scripted warm-up length.
    pub plan: SessionPlan,
    /// Training ratio of the no-curriculum arm.
    pub constant_ratio: f64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            arm: CurriculumArm::Full,
            plan: SessionPlan::default(),
            constant_ratio: 0.7,
        }
    }
}

impl CurriculumConfig {
    /// The plan actually trained, after applying the ablation arm.
    pub fn effective_plan(&self) -> SessionPlan {
        self.plan.for_arm(self.arm, self.constant_ratio)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PursuitConfig {
    pub k_att: f64,
    /// Torus unrolling radius of the Pincer optimizer.
    pub pincer_k: usize,
}

impl Default for PursuitConfig {
    fn default() -> Self {
        Self {
            k_att: 1.5,
            pincer_k: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub heading_bins: usize,
    pub angle_bins: usize,
    pub eval_episodes: usize,
    pub eval_ratios: Vec<f64>,
    /// Evaluation rollouts are repeated once per seed and pooled.
    pub eval_seeds: Vec<u64>,
    /// Store per-step pointwise influence in the coordination report.
    pub keep_pointwise: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            heading_bins: DEFAULT_HEADING_BINS,
            angle_bins: 16,
            eval_episodes: 100,
            eval_ratios: (5..=12).map(|t| f64::from(t) / 10.0).collect(),
            eval_seeds: vec![0, 1, 2, 3, 4],
            keep_pointwise: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub strategy: Strategy,
    /// Epochs between checkpoints during training.
    pub checkpoint_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            strategy: Strategy::CdDdpg,
            checkpoint_every: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub env: EnvConfig,
    pub curriculum: CurriculumConfig,
    pub ddpg: DdpgConfig,
    pub pursuit: PursuitConfig,
    pub metrics: MetricsConfig,
    pub run: RunConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            env: EnvConfig::default(),
            curriculum: CurriculumConfig::default(),
            ddpg: DdpgConfig::default(),
            pursuit: PursuitConfig::default(),
            metrics: MetricsConfig::default(),
            run: RunConfig::default(),
        }
    }
}

fn invalid(path: &str, message: impl ToString) -> CliError {
    CliError::Config {
        path: path.to_string(),
        message: message.to_string(),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(if path.is_empty() { "." } else { &path }, e.into_inner())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(CliError::Missing(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("expected {CONFIG_SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        self.env.validate().map_err(|e| invalid("env", e))?;
        self.ddpg.validate().map_err(|e| invalid("ddpg", e))?;
        self.curriculum
            .plan
            .validate()
            .map_err(|e| invalid("curriculum.plan", e))?;
        let c = self.curriculum.constant_ratio;
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid("curriculum.constant_ratio", "must be positive"));
        }
        GreedyParams::new(self.pursuit.k_att).map_err(|e| invalid("pursuit.k_att", e))?;
        if self.pursuit.pincer_k == 0 {
            return Err(invalid("pursuit.pincer_k", "must be at least 1"));
        }
        let m = &self.metrics;
        if m.heading_bins < 2 {
            return Err(invalid("metrics.heading_bins", "must be at least 2"));
        }
        if m.angle_bins == 0 {
            return Err(invalid("metrics.angle_bins", "must be at least 1"));
        }
        if m.eval_episodes == 0 {
            return Err(invalid("metrics.eval_episodes", "must be at least 1"));
        }
        if m.eval_seeds.is_empty() {
            return Err(invalid("metrics.eval_seeds", "must list at least one seed"));
        }
        if let Some(i) = m.eval_ratios.iter().position(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(invalid(&format!("metrics.eval_ratios[{i}]"), "must be positive"));
        }
        if self.run.checkpoint_every == 0 {
            return Err(invalid("run.checkpoint_every", "must be at least 1"));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, ignoring the output directory.
    pub fn digest(&self) -> Result<String> {
        let mut c = self.clone();
        c.run.out_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&c)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_reference_values() {
        let c = ExperimentConfig::default();
        assert_eq!(c.ddpg.actor_lr, 1e-4);
        assert_eq!(c.ddpg.critic_lr, 1e-3);
        assert_eq!(c.ddpg.clip_norm, 0.5);
        assert_eq!(c.ddpg.tau, 0.001);
        assert_eq!(c.ddpg.buffer_capacity, 500_000);
        assert_eq!(c.ddpg.batch_size, 512);
        assert_eq!(c.ddpg.gamma, 0.99);
        assert_eq!(c.ddpg.actor_hidden, vec![128, 128]);
        assert_eq!(c.ddpg.critic_hidden, vec![128, 128, 128]);
        assert_eq!(c.pursuit.k_att, 1.5);
        assert_eq!(c.curriculum.plan.warmup_epochs, 1000);
        assert_eq!(c.env.episode_length, 500);
        assert_eq!(c.env.n_pursuers, 3);
        assert_eq!(c.curriculum.plan.total_epochs(), 50_000);
        assert_eq!(c.curriculum.plan.sessions.len(), 8);
        assert_eq!(c.curriculum.plan.sessions[0].v0, 1.2);
        assert_eq!(c.curriculum.plan.sessions[7].v_target, 0.4);
        c.validate().unwrap();
    }

    #[test]
    fn empty_object_loads_defaults() {
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn round_trips() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let err = ExperimentConfig::from_json(r#"{"env": {"capture_radus": 0.1}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("env.capture_radus"), "{msg}");
    }

    #[test]
    fn invalid_values_report_their_path() {
        let err = ExperimentConfig::from_json(r#"{"env": {"capture_radius": -1.0}}"#).unwrap_err();
        assert!(err.to_string().starts_with("env:"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"metrics": {"eval_ratios": [1.0, 0.0]}}"#)
            .unwrap_err();
        assert!(err.to_string().starts_with("metrics.eval_ratios[1]"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"run": {"strategy": "sneaky"}}"#).unwrap_err();
        assert!(err.to_string().starts_with("run.strategy"), "{err}");
    }

    #[test]
    fn digest_ignores_output_directory_only() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.run.out_dir = PathBuf::from("elsewhere");
        assert_eq!(a.digest().unwrap(), b.digest().unwrap());
        b.run.seed = 1;
        assert_ne!(a.digest().unwrap(), b.digest().unwrap());
    }

    #[test]
    fn strategy_names() {
        for s in ["greedy", "pincer", "cd_ddpg", "cd_ddpg_partial", "random"] {
            assert_eq!(Strategy::parse(s).unwrap().name(), s);
        }
        assert!(Strategy::parse("nope").is_none());
    }
}
