//! Analytic evader.
//!
//! The evader scores a candidate heading `θ` with the potential
//! `U(θ) = Σ (1/r_i) cos(θ − θ̃_i)`, where `r_i` and `θ̃_i` are the distance and
//! bearing from the evader to pursuer `i`. Expanding the cosine gives
//! `U(θ) = A cos θ + B sin θ` with `A = Σ cos θ̃_i / r_i`, `B = Σ sin θ̃_i / r_i`,
//! whose global minimizer is `atan2(−B, −A)`.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{displacement, normalize_angle, Point2};
use crate::Pose;

/// Resultant magnitudes below this are treated as a perfectly symmetric surround.
pub const DEGENERACY_THRESHOLD: f64 = 1e-9;

/// Distance and bearing from the evader to one pursuer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarContact {
    pub r: f64,
    pub theta_rel: f64,
}

impl PolarContact {
    pub fn new(r: f64, theta_rel: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Singularity(format!("contact distance {r} must be positive")));
        }
        if !theta_rel.is_finite() {
            return Err(Error::InvalidArgument("contact bearing must be finite".into()));
        }
        Ok(Self {
            r,
            theta_rel: normalize_angle(theta_rel),
        })
    }
}

/// Builds contacts from the minimal wrapped displacements evader → pursuer.
pub fn contacts(evader: Point2, pursuers: &[Point2]) -> Result<Vec<PolarContact>> {
    pursuers
        .iter()
        .map(|&p| {
            let d = displacement(evader, p);
            let r = d.norm();
            if r == 0.0 {
                return Err(Error::Singularity("pursuer co-located with evader".into()));
            }
            Ok(PolarContact {
                r,
                theta_rel: d.bearing(),
            })
        })
        .collect()
}

/// The distance-weighted resultant `(A, B)` of a contact set.
pub fn weighted_resultant(contacts: &[PolarContact]) -> (f64, f64) {
    contacts.iter().fold((0.0, 0.0), |(a, b), c| {
        let w = 1.0 / c.r;
        (a + w * c.theta_rel.cos(), b + w * c.theta_rel.sin())
    })
}

/// Evaluates the evasion potential at heading `theta_e`.
pub fn evade_cost(theta_e: f64, contacts: &[PolarContact]) -> Result<f64> {
    if contacts.is_empty() {
        return Err(Error::EmptyInput("evade_cost needs at least one contact".into()));
    }
    let mut total = 0.0;
    for c in contacts {
        if !(c.r > 0.0) {
            return Err(Error::Singularity(format!("contact distance {} is not positive", c.r)));
        }
        total += (theta_e - c.theta_rel).cos() / c.r;
    }
    Ok(total)
}

/// Heading that globally minimizes the evasion potential for `contacts`, or
/// `None` when the resultant vanishes and every heading is equally good.
pub fn minimizing_heading(contacts: &[PolarContact]) -> Option<f64> {
    let (a, b) = weighted_resultant(contacts);
    if a.hypot(b) < DEGENERACY_THRESHOLD {
        None
    } else {
        Some(normalize_angle((-b).atan2(-a)))
    }
}

/// Heading chosen by the evader given the current pursuer positions.
///
/// In a degenerate symmetric surround the heading is drawn uniformly from
/// `rng` instead.
pub fn evade_heading<R: Rng + ?Sized>(
    evader: &Pose,
    pursuers: &[Point2],
    rng: &mut R,
) -> Result<f64> {
    if pursuers.is_empty() {
        return Err(Error::EmptyInput("evader needs at least one pursuer".into()));
    }
    let contacts = contacts(evader.position, pursuers)?;
    Ok(match minimizing_heading(&contacts) {
        Some(h) => h,
        None => rng.random_range(-PI..PI),
    })
}
