//! The pursuit-evasion Markov game on the unit torus.
//!
//! `n` pursuers chase one analytic evader. Every step all agents move
//! simultaneously at their maximum speed along their chosen heading; the
//! evader's heading is computed from the pre-step state only.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evader::evade_heading;
use crate::geometry::{displacement, distance, normalize_angle, Point2};

/// Shared per-step penalty while the evader is free.
pub const STEP_REWARD: f64 = -0.1;
/// Shared reward on the step the evader is captured.
pub const CAPTURE_REWARD: f64 = 50.0;

/// Position and heading of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Point2,
    heading: f64,
}

impl Pose {
    pub fn new(position: Point2, heading: f64) -> Self {
        Self {
            position,
            heading: normalize_angle(heading),
        }
    }

    /// Heading in `[-π, π)`.
    pub fn heading(&self) -> f64 {
        self.heading
    }

    /// Advances `speed` along `heading`, wrapping on the torus.
    fn advance(&self, heading: f64, speed: f64) -> Result<Pose> {
        let heading = normalize_angle(heading);
        let position = self
            .position
            .translate(speed * heading.cos(), speed * heading.sin())?;
        Ok(Pose { position, heading })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub pursuers: Vec<Pose>,
    pub evader: Pose,
    pub step: usize,
}

impl WorldState {
    pub fn pursuer_positions(&self) -> Vec<Point2> {
        self.pursuers.iter().map(|p| p.position).collect()
    }

    /// Smallest torus distance between any pursuer and the evader.
    pub fn min_evader_distance(&self) -> f64 {
        self.pursuers
            .iter()
            .map(|p| distance(p.position, self.evader.position))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub n_pursuers: usize,
    /// World units per step.
    pub evader_speed: f64,
    /// Pursuer speed divided by evader speed.
    pub velocity_ratio: f64,
    pub capture_radius: f64,
    pub episode_length: usize,
    /// Initial states with any pursuer this close to the evader are redrawn.
    /// Values below `capture_radius` are raised to it.
    pub spawn_clearance: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            n_pursuers: 3,
            evader_speed: 0.05,
            velocity_ratio: 1.0,
            capture_radius: 0.05,
            episode_length: 500,
            spawn_clearance: 0.1,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.n_pursuers == 0 {
            return bad("n_pursuers must be at least 1");
        }
        if !(self.evader_speed > 0.0) || !self.evader_speed.is_finite() {
            return bad("evader_speed must be positive");
        }
        if !(self.velocity_ratio > 0.0) || !self.velocity_ratio.is_finite() {
            return bad("velocity_ratio must be positive");
        }
        if !(self.capture_radius > 0.0 && self.capture_radius < 0.5) {
            return bad("capture_radius must lie in (0, 0.5)");
        }
        if self.episode_length == 0 {
            return bad("episode_length must be at least 1");
        }
        if !(self.spawn_clearance >= 0.0 && self.spawn_clearance < 0.5) {
            return bad("spawn_clearance must lie in [0, 0.5)");
        }
        Ok(())
    }

    pub fn pursuer_speed(&self) -> f64 {
        self.velocity_ratio * self.evader_speed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub rewards: Vec<f64>,
    pub captured: bool,
    pub done: bool,
    pub truncated: bool,
}

/// Which pieces of the world a pursuer observes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMode {
    /// Own heading, evader offset and every teammate offset.
    Full,
    /// Own heading and evader offset only.
    Partial,
}

impl ObservationMode {
    pub fn dim(self, n_pursuers: usize) -> usize {
        match self {
            ObservationMode::Full => 4 + 2 * n_pursuers.saturating_sub(1),
            ObservationMode::Partial => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Draws a fresh initial state: positions uniform on the torus, headings
/// uniform on `[-π, π)`. Draws that start within the spawn clearance of a
/// capture are rejected and redrawn.
pub fn reset<R: Rng + ?Sized>(config: &EnvConfig, rng: &mut R) -> Result<WorldState> {
    config.validate()?;
    let clearance = config.spawn_clearance.max(config.capture_radius);
    loop {
        let mut draw = || -> Result<Pose> {
            let x = rng.random::<f64>();
            let y = rng.random::<f64>();
            let h = rng.random_range(-PI..PI);
            Ok(Pose::new(Point2::new(x, y)?, h))
        };
        let pursuers = (0..config.n_pursuers).map(|_| draw()).collect::<Result<Vec<_>>>()?;
        let evader = draw()?;
        let state = WorldState {
            pursuers,
            evader,
            step: 0,
        };
        if state.min_evader_distance() > clearance {
            return Ok(state);
        }
    }
}

/// True iff some pursuer is within the capture radius of the evader.
pub fn is_captured(state: &WorldState, config: &EnvConfig) -> bool {
    state.min_evader_distance() <= config.capture_radius
}

/// True once the episode has ended by capture or by time limit.
pub fn is_done(state: &WorldState, config: &EnvConfig) -> bool {
    state.step >= config.episode_length || is_captured(state, config)
}

/// Advances the game by one simultaneous move.
pub fn step<R: Rng + ?Sized>(
    state: &WorldState,
    pursuer_headings: &[f64],
    config: &EnvConfig,
    rng: &mut R,
) -> Result<(WorldState, StepOutcome)> {
    if is_done(state, config) {
        return Err(Error::ContractViolation(format!(
            "step called on a finished episode (step {})",
            state.step
        )));
    }
    if pursuer_headings.len() != state.pursuers.len() {
        return Err(Error::DimensionMismatch {
            expected: state.pursuers.len(),
            got: pursuer_headings.len(),
        });
    }
    if let Some(h) = pursuer_headings.iter().find(|h| !h.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite heading {h}")));
    }

    let evader_heading = evade_heading(&state.evader, &state.pursuer_positions(), rng)?;

    let pursuer_speed = config.pursuer_speed();
    let pursuers = state
        .pursuers
        .iter()
        .zip(pursuer_headings)
        .map(|(p, &h)| p.advance(h, pursuer_speed))
        .collect::<Result<Vec<_>>>()?;
    let evader = state.evader.advance(evader_heading, config.evader_speed)?;
    let next = WorldState {
        pursuers,
        evader,
        step: state.step + 1,
    };

    let captured = is_captured(&next, config);
    let truncated = !captured && next.step >= config.episode_length;
    let reward = if captured { CAPTURE_REWARD } else { STEP_REWARD };
    let outcome = StepOutcome {
        rewards: vec![reward; next.pursuers.len()],
        captured,
        done: captured || truncated,
        truncated,
    };
    Ok((next, outcome))
}

fn check_index(state: &WorldState, i: usize) -> Result<&Pose> {
    state.pursuers.get(i).ok_or(Error::IndexOutOfRange {
        index: i,
        len: state.pursuers.len(),
    })
}

/// `[cos θ_i, sin θ_i, Δevader, Δteammate_j for j ≠ i ascending]`.
pub fn observe_full(state: &WorldState, i: usize) -> Result<Observation> {
    let me = check_index(state, i)?;
    let mut v = Vec::with_capacity(ObservationMode::Full.dim(state.pursuers.len()));
    v.push(me.heading.cos());
    v.push(me.heading.sin());
    let d = displacement(me.position, state.evader.position);
    v.extend([d.dx, d.dy]);
    for (j, mate) in state.pursuers.iter().enumerate() {
        if j != i {
            let d = displacement(me.position, mate.position);
            v.extend([d.dx, d.dy]);
        }
    }
    Ok(Observation(v))
}

/// `[cos θ_i, sin θ_i, Δevader]`; no teammate information.
pub fn observe_partial(state: &WorldState, i: usize) -> Result<Observation> {
    let me = check_index(state, i)?;
    let d = displacement(me.position, state.evader.position);
    Ok(Observation(vec![me.heading.cos(), me.heading.sin(), d.dx, d.dy]))
}

pub fn observe(state: &WorldState, i: usize, mode: ObservationMode) -> Result<Observation> {
    match mode {
        ObservationMode::Full => observe_full(state, i),
        ObservationMode::Partial => observe_partial(state, i),
    }
}
