//! Curriculum-driven decentralized training with resumable checkpoints.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use pursuit_core::curriculum::{behavior_for_epoch, scripted_action, BehaviorPhase, SessionPlan};
use pursuit_core::ddpg::{AgentLearner, Transition};
use pursuit_core::env::{self, EnvConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::tables::{read_table_file, sig9, TableWriter};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const CURVE_FILE: &str = "training_curve.csv";
pub const CURVE_HEADER: &str =
    "session,epoch,global_epoch,ratio,phase,mean_return,captured,steps,updates,critic_loss,actor_q";

/// Per-epoch training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub session: usize,
    pub epoch: u64,
    pub global_epoch: u64,
    pub ratio: f64,
    pub phase: BehaviorPhase,
    /// Episode return averaged over pursuers.
    pub mean_return: f64,
    pub captured: u8,
    pub steps: usize,
    pub updates: u64,
    pub critic_loss: Option<f64>,
    pub actor_q: Option<f64>,
}

impl CurveRow {
    fn fields(&self) -> [String; 11] {
        let opt = |v: Option<f64>| v.map(sig9).unwrap_or_default();
        [
            self.session.to_string(),
            self.epoch.to_string(),
            self.global_epoch.to_string(),
            sig9(self.ratio),
            match self.phase {
                BehaviorPhase::Scripted => "scripted".into(),
                BehaviorPhase::Learned => "learned".into(),
            },
            sig9(self.mean_return),
            self.captured.to_string(),
            self.steps.to_string(),
            self.updates.to_string(),
            opt(self.critic_loss),
            opt(self.actor_q),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub config_digest: String,
    pub config: ExperimentConfig,
    /// Next epoch to run, as (session, epoch within session).
    pub session: usize,
    pub epoch: u64,
    pub global_epoch: u64,
    pub env_rng: ChaCha8Rng,
    pub agent_rngs: Vec<ChaCha8Rng>,
    pub learners: Vec<AgentLearner>,
    pub curve: Vec<CurveRow>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        let mut w = BufWriter::new(File::create(&tmp)?);
        serde_json::to_writer(&mut w, self)?;
        w.flush()?;
        drop(w);
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(CliError::Missing(path.to_path_buf()));
        }
        let ckpt: Checkpoint = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if ckpt.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(CliError::SchemaVersion {
                file: path.display().to_string(),
                found: ckpt.schema_version.to_string(),
                expected: CHECKPOINT_SCHEMA_VERSION,
            });
        }
        Ok(ckpt)
    }

    pub fn is_finished(&self) -> bool {
        self.session >= self.config.curriculum.effective_plan().sessions.len()
    }
}

fn fresh(config: &ExperimentConfig) -> Result<Checkpoint> {
    let seed = config.run.seed;
    let mut env_rng = ChaCha8Rng::seed_from_u64(seed);
    env_rng.set_stream(0);
    let obs_dim = config
        .run
        .strategy
        .observation_mode()
        .dim(config.env.n_pursuers);
    let mut agent_rngs = Vec::new();
    let mut learners = Vec::new();
    for i in 0..config.env.n_pursuers {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1 + i as u64);
        learners.push(AgentLearner::new(obs_dim, config.ddpg.clone(), &mut rng)?);
        agent_rngs.push(rng);
    }
    Ok(Checkpoint {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        config_digest: config.digest()?,
        config: config.clone(),
        session: 0,
        epoch: 0,
        global_epoch: 0,
        env_rng,
        agent_rngs,
        learners,
        curve: Vec::new(),
    })
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub resume: Option<PathBuf>,
    /// Stop (with a checkpoint) once this many epochs have run in total.
    pub stop_after: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub curve: Vec<CurveRow>,
    pub finished: bool,
    pub checkpoint: PathBuf,
    pub curve_csv: PathBuf,
}

pub fn write_curve(path: &Path, curve: &[CurveRow]) -> Result<()> {
    let mut w = TableWriter::create(path, CURVE_HEADER)?;
    for row in curve {
        w.row(row.fields())?;
    }
    w.finish()?.flush()?;
    Ok(())
}

pub fn read_curve(path: &Path) -> Result<Vec<CurveRow>> {
    read_table_file(path, CURVE_HEADER)
}

fn run_epoch(
    state: &mut Checkpoint,
    plan: &SessionPlan,
    base: &EnvConfig,
    mode: pursuit_core::env::ObservationMode,
) -> Result<CurveRow> {
    let (session, epoch) = (state.session, state.epoch);
    let ratio = plan.ratio_at(session, epoch)?;
    let phase = behavior_for_epoch(plan, session, epoch)?;
    let config = EnvConfig {
        velocity_ratio: ratio,
        ..base.clone()
    };
    for l in &mut state.learners {
        l.reset_noise();
    }
    let mut world = env::reset(&config, &mut state.env_rng)?;
    let mut ret = vec![0.0; config.n_pursuers];
    let mut captured = false;
    let mut updates = 0u64;
    let mut loss_sum = 0.0;
    let mut q_sum = 0.0;
    while !env::is_done(&world, &config) {
        let obs = (0..config.n_pursuers)
            .map(|i| Ok(env::observe(&world, i, mode)?.0))
            .collect::<Result<Vec<_>>>()?;
        let mut headings = Vec::with_capacity(config.n_pursuers);
        for (i, (learner, rng)) in state.learners.iter_mut().zip(&mut state.agent_rngs).enumerate() {
            headings.push(match phase {
                BehaviorPhase::Scripted => scripted_action(&world.pursuers[i], world.evader.position)?,
                BehaviorPhase::Learned => learner.act_explore(&obs[i], rng)?,
            });
        }
        let (next, out) = env::step(&world, &headings, &config, &mut state.env_rng)?;
        for (i, (learner, rng)) in state.learners.iter_mut().zip(&mut state.agent_rngs).enumerate() {
            let next_obs = env::observe(&next, i, mode)?.0;
            learner.remember(Transition::new(
                obs[i].clone(),
                headings[i],
                out.rewards[i],
                next_obs,
                out.captured,
            )?)?;
            if let Some(stats) = learner.train_step(rng)? {
                updates += 1;
                loss_sum += stats.critic_loss;
                q_sum += stats.actor_q;
            }
            ret[i] += out.rewards[i];
        }
        captured = out.captured;
        world = next;
    }
    let mean = |s: f64| (updates > 0).then(|| s / updates as f64);
    Ok(CurveRow {
        session,
        epoch,
        global_epoch: state.global_epoch,
        ratio,
        phase,
        mean_return: ret.iter().sum::<f64>() / ret.len() as f64,
        captured: u8::from(captured),
        steps: world.step,
        updates,
        critic_loss: mean(loss_sum),
        actor_q: mean(q_sum),
    })
}

/// Runs (or resumes) the configured session plan.
pub fn train(config: &ExperimentConfig, opts: &TrainOptions) -> Result<TrainSummary> {
    config.validate()?;
    if !config.run.strategy.is_learned() {
        return Err(CliError::Usage(format!(
            "training needs a learned strategy, not `{}`",
            config.run.strategy.name()
        )));
    }
    let mut state = match &opts.resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            let current = config.digest()?;
            if ckpt.config_digest != current {
                return Err(CliError::DigestMismatch {
                    checkpoint: ckpt.config_digest,
                    current,
                });
            }
            ckpt
        }
        None => fresh(config)?,
    };
    let out = &config.run.out_dir;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.json"), config.to_json()?)?;
    let ckpt_path = out.join(CHECKPOINT_FILE);
    let curve_path = out.join(CURVE_FILE);
    let save = |s: &Checkpoint| -> Result<()> {
        s.save(&ckpt_path)?;
        write_curve(&curve_path, &s.curve)
    };

    let plan = config.curriculum.effective_plan();
    let mode = config.run.strategy.observation_mode();
    while state.session < plan.sessions.len() {
        if opts.stop_after.is_some_and(|n| state.global_epoch >= n) {
            save(&state)?;
            return Ok(TrainSummary {
                curve: state.curve,
                finished: false,
                checkpoint: ckpt_path,
                curve_csv: curve_path,
            });
        }
        let row = run_epoch(&mut state, &plan, &config.env, mode)?;
        state.curve.push(row);
        state.global_epoch += 1;
        state.epoch += 1;
        if state.epoch >= plan.sessions[state.session].epochs {
            state.session += 1;
            state.epoch = 0;
        }
        if state.global_epoch % config.run.checkpoint_every == 0 {
            save(&state)?;
        }
    }
    save(&state)?;
    Ok(TrainSummary {
        curve: state.curve,
        finished: true,
        checkpoint: ckpt_path,
        curve_csv: curve_path,
    })
}
