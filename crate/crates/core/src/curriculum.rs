//! Velocity-ratio annealing and the scripted-to-learned behavior switch.

use serde::{Deserialize, Serialize};

use crate::env::Pose;
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::pursuit::greedy_heading;

/// Linear annealing of the pursuer/evader speed ratio:
/// `v_i = v_target + (v0 − v_target)·max((v_decay − i)/v_decay, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocitySchedule {
    pub v0: f64,
    pub v_target: f64,
    pub v_decay: u64,
}

impl VelocitySchedule {
    pub fn new(v0: f64, v_target: f64, v_decay: u64) -> Result<Self> {
        let s = Self {
            v0,
            v_target,
            v_decay,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.v_decay == 0 {
            return Err(Error::InvalidArgument("v_decay must be at least 1".into()));
        }
        if !(self.v0 > 0.0) || !(self.v_target > 0.0) {
            return Err(Error::InvalidArgument("velocity ratios must be positive".into()));
        }
        Ok(())
    }

    pub fn ratio_at(&self, epoch: u64) -> f64 {
        let d = self.v_decay as f64;
        let frac = ((d - epoch as f64) / d).max(0.0);
        self.v_target + (self.v0 - self.v_target) * frac
    }
}

pub fn velocity_at_epoch(schedule: &VelocitySchedule, epoch: u64) -> f64 {
    schedule.ratio_at(epoch)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorPhase {
    /// Greedy supervisory policy fills the replay buffers.
    Scripted,
    /// Actor output plus OU noise.
    Learned,
}

/// One training session: an annealing schedule run for `epochs` episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Session {
    pub v0: f64,
    pub v_target: f64,
    pub v_decay: u64,
    pub epochs: u64,
    pub use_scripted_warmup: bool,
}

impl Session {
    pub fn schedule(&self) -> VelocitySchedule {
        VelocitySchedule {
            v0: self.v0,
            v_target: self.v_target,
            v_decay: self.v_decay,
        }
    }
}

/// Ablation arms of the curriculum study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurriculumArm {
    Full,
    NoBehavioral,
    NoVelocity,
    NoCurriculum,
}

/// Ordered chain of sessions plus the scripted warm-up length `W`.
///
/// Learner weights carry over between sessions; only the first session may
/// use the scripted warm-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionPlan {
    pub sessions: Vec<Session>,
    pub warmup_epochs: u64,
}

/// Tolerance for the session chaining check.
const CHAIN_TOLERANCE: f64 = 1e-12;

impl Default for SessionPlan {
    /// Eight chained sessions annealing 1.2 → 0.4 in steps of 0.1, 50,000
    /// epochs in total, with the 15,000 annealing epochs split evenly.
    fn default() -> Self {
        Self::chained(12, 4, 1875, 6250, 1000)
    }
}

impl SessionPlan {
    /// Sessions `tenths_from/10 → (tenths_from−1)/10 → … → tenths_to/10`.
    pub fn chained(tenths_from: u32, tenths_to: u32, v_decay: u64, epochs: u64, warmup: u64) -> Self {
        let sessions = (tenths_to..tenths_from)
            .rev()
            .enumerate()
            .map(|(i, t)| Session {
                v0: f64::from(t + 1) / 10.0,
                v_target: f64::from(t) / 10.0,
                v_decay,
                epochs,
                use_scripted_warmup: i == 0,
            })
            .collect();
        Self {
            sessions,
            warmup_epochs: warmup,
        }
    }

    /// A single session at a fixed ratio.
    pub fn constant(ratio: f64, epochs: u64, warmup: u64) -> Self {
        Self {
            sessions: vec![Session {
                v0: ratio,
                v_target: ratio,
                v_decay: 1,
                epochs,
                use_scripted_warmup: warmup > 0,
            }],
            warmup_epochs: warmup,
        }
    }

    /// Ablation arms derived from a full plan.
    ///
    /// `NoVelocity` trains at the plan's final target ratio throughout and
    /// `NoCurriculum` trains at `constant_ratio` without warm-up.
    pub fn for_arm(&self, arm: CurriculumArm, constant_ratio: f64) -> Self {
        let total: u64 = self.sessions.iter().map(|s| s.epochs).sum();
        match arm {
            CurriculumArm::Full => self.clone(),
            CurriculumArm::NoBehavioral => Self {
                warmup_epochs: 0,
                ..self.clone()
            },
            CurriculumArm::NoVelocity => {
                let target = self.sessions.last().map_or(constant_ratio, |s| s.v_target);
                Self::constant(target, total, self.warmup_epochs)
            }
            CurriculumArm::NoCurriculum => Self::constant(constant_ratio, total, 0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sessions.is_empty() {
            return Err(Error::InvalidArgument("session plan needs at least one session".into()));
        }
        for (i, s) in self.sessions.iter().enumerate() {
            s.schedule()
                .validate()
                .map_err(|e| Error::InvalidArgument(format!("session {i}: {e}")))?;
            if s.epochs == 0 {
                return Err(Error::InvalidArgument(format!("session {i}: epochs must be positive")));
            }
            if i > 0 && s.use_scripted_warmup {
                return Err(Error::InvalidArgument(format!(
                    "session {i}: only the first session may use the scripted warm-up"
                )));
            }
        }
        for (i, w) in self.sessions.windows(2).enumerate() {
            let end = w[0].schedule().ratio_at(w[0].epochs);
            if (w[1].v0 - end).abs() > CHAIN_TOLERANCE {
                return Err(Error::InvalidArgument(format!(
                    "session {} starts at ratio {} but session {i} ends at {end}",
                    i + 1,
                    w[1].v0
                )));
            }
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> u64 {
        self.sessions.iter().map(|s| s.epochs).sum()
    }

    pub fn ratio_at(&self, session: usize, epoch: u64) -> Result<f64> {
        let s = self.sessions.get(session).ok_or(Error::IndexOutOfRange {
            index: session,
            len: self.sessions.len(),
        })?;
        Ok(s.schedule().ratio_at(epoch))
    }
}

/// Scripted iff this is the first session, it is flagged for warm-up, and
/// `epoch < W`.
pub fn behavior_for_epoch(plan: &SessionPlan, session: usize, epoch: u64) -> Result<BehaviorPhase> {
    let s = plan.sessions.get(session).ok_or(Error::IndexOutOfRange {
        index: session,
        len: plan.sessions.len(),
    })?;
    Ok(if session == 0 && s.use_scripted_warmup && epoch < plan.warmup_epochs {
        BehaviorPhase::Scripted
    } else {
        BehaviorPhase::Learned
    })
}

/// The supervisory warm-up policy: run straight at the evader.
pub fn scripted_action(pursuer: &Pose, evader: Point2) -> Result<f64> {
    greedy_heading(pursuer, evader)
}
