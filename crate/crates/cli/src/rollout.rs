//! Frozen team policies and single-episode rollouts.

use std::f64::consts::PI;

use pursuit_core::ddpg::AgentLearner;
use pursuit_core::env::{self, EnvConfig, ObservationMode, WorldState};
use pursuit_core::pursuit::{greedy_headings, pincer_headings};
use rand::Rng;

use crate::error::Result;
use crate::tables::{agent_id, TrajectoryRow};

/// Decision rule for the whole pursuer team.
pub enum TeamPolicy<'a> {
    Greedy,
    Pincer { k: usize },
    Random,
    /// Deterministic actor outputs, no exploration noise.
    Learned {
        learners: &'a [AgentLearner],
        mode: ObservationMode,
    },
}

impl TeamPolicy<'_> {
    pub fn headings<R: Rng + ?Sized>(&self, state: &WorldState, rng: &mut R) -> Result<Vec<f64>> {
        Ok(match self {
            TeamPolicy::Greedy => greedy_headings(state)?,
            TeamPolicy::Pincer { k } => pincer_headings(state, *k)?,
            TeamPolicy::Random => (0..state.pursuers.len())
                .map(|_| rng.random_range(-PI..PI))
                .collect(),
            TeamPolicy::Learned { learners, mode } => learners
                .iter()
                .enumerate()
                .map(|(i, l)| l.act(env::observe(state, i, *mode)?.as_slice()))
                .collect::<pursuit_core::Result<_>>()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeResult {
    pub captured: bool,
    pub steps: usize,
    /// Sum of the shared team reward.
    pub team_return: f64,
}

/// Plays one episode, handing every post-move row to `log`.
pub fn run_episode<E, P, L>(
    config: &EnvConfig,
    policy: &TeamPolicy<'_>,
    episode: u64,
    env_rng: &mut E,
    policy_rng: &mut P,
    mut log: L,
) -> Result<EpisodeResult>
where
    E: Rng + ?Sized,
    P: Rng + ?Sized,
    L: FnMut(TrajectoryRow) -> Result<()>,
{
    let mut state = env::reset(config, env_rng)?;
    let mut team_return = 0.0;
    loop {
        let headings = policy.headings(&state, policy_rng)?;
        let (next, out) = env::step(&state, &headings, config, env_rng)?;
        team_return += out.rewards[0];
        let captured = u8::from(out.captured);
        let step = next.step as u64;
        for (i, (pose, &action)) in next.pursuers.iter().zip(&headings).enumerate() {
            log(TrajectoryRow {
                episode,
                step,
                agent: agent_id(i),
                x: pose.position.x(),
                y: pose.position.y(),
                heading: pose.heading(),
                action,
                reward: out.rewards[i],
                captured,
                ratio: config.velocity_ratio,
            })?;
        }
        let e = next.evader;
        log(TrajectoryRow {
            episode,
            step,
            agent: "e".into(),
            x: e.position.x(),
            y: e.position.y(),
            heading: e.heading(),
            action: e.heading(),
            reward: 0.0,
            captured,
            ratio: config.velocity_ratio,
        })?;
        state = next;
        if out.done {
            return Ok(EpisodeResult {
                captured: out.captured,
                steps: state.step,
                team_return,
            });
        }
    }
}
