//! Multi-agent pursuit-evasion on the unit torus.
//!
//! The crate provides the game itself ([`env`]), the analytic evader
//! ([`evader`]), scripted pursuers ([`pursuit`]), a small dense network
//! toolkit ([`nn`]), decentralized DDPG learners ([`ddpg`]), the training
//! curricula ([`curriculum`]) and coordination metrics ([`metrics`]).

pub mod curriculum;
pub mod ddpg;
pub mod env;
pub mod error;
pub mod evader;
pub mod geometry;
pub mod metrics;
pub mod nn;
pub mod pursuit;

pub use env::{EnvConfig, Observation, ObservationMode, Pose, StepOutcome, WorldState};
pub use error::{Error, Result};
pub use geometry::{Displacement2, Point2};
