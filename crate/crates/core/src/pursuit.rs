//! Scripted pursuer strategies.
//!
//! * Greedy: follow the attractive potential-field force
//!   `F = −k_att (q_i − q_goal)` toward the evader. Only the force direction
//!   is used, so the heading does not depend on `k_att`.
//! * Pincer: unroll the torus `k` tiles in every direction and pick one
//!   replica per pursuer so that the evader's best response is as bad as
//!   possible. For a fixed selection the evader's minimum of
//!   `Σ (1/r_i) cos(θ − θ̃_i)` is `−√(A² + B²)`, so the pursuers maximize
//!   that value over all `((2k+1)²)ⁿ` joint selections.

use serde::{Deserialize, Serialize};

use crate::env::{Pose, WorldState};
use crate::error::{Error, Result};
use crate::geometry::{displacement, normalize_angle, replicate, Point2};

/// Objective values this close to the maximum count as ties.
pub const PINCER_TIE_TOLERANCE: f64 = 1e-9;

/// Hard cap on the joint selections one pincer solve may enumerate.
pub const MAX_PINCER_SELECTIONS: u64 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreedyParams {
    pub k_att: f64,
}

impl Default for GreedyParams {
    fn default() -> Self {
        Self { k_att: 1.5 }
    }
}

impl GreedyParams {
    pub fn new(k_att: f64) -> Result<Self> {
        if !(k_att > 0.0) || !k_att.is_finite() {
            return Err(Error::InvalidArgument(format!("k_att must be positive, got {k_att}")));
        }
        Ok(Self { k_att })
    }

    /// Attractive force `−∇U_att` on the torus, using the wrapped offset.
    pub fn attractive_force(&self, pursuer: Point2, goal: Point2) -> [f64; 2] {
        let d = displacement(pursuer, goal);
        [self.k_att * d.dx, self.k_att * d.dy]
    }
}

/// Greedy pursuit heading: the direction of the attractive force.
pub fn greedy_heading(pursuer: &Pose, evader: Point2) -> Result<f64> {
    let [fx, fy] = GreedyParams::default().attractive_force(pursuer.position, evader);
    if fx == 0.0 && fy == 0.0 {
        return Err(Error::Singularity("pursuer co-located with evader".into()));
    }
    Ok(normalize_angle(fy.atan2(fx)))
}

/// Greedy heading for every pursuer in `state`.
pub fn greedy_headings(state: &WorldState) -> Result<Vec<f64>> {
    state
        .pursuers
        .iter()
        .map(|p| greedy_heading(p, state.evader.position))
        .collect()
}

/// The evader's best-response value `−√(A² + B²)` for planar replica
/// positions surrounding `evader`.
pub fn pincer_objective(replicas: &[[f64; 2]], evader: [f64; 2]) -> Result<f64> {
    let mut a = 0.0;
    let mut b = 0.0;
    for r in replicas {
        let dx = r[0] - evader[0];
        let dy = r[1] - evader[1];
        let d2 = dx * dx + dy * dy;
        if d2 == 0.0 {
            return Err(Error::Singularity("replica co-located with evader".into()));
        }
        // cos θ̃ / r = dx / r², likewise for sin.
        a += dx / d2;
        b += dy / d2;
    }
    Ok(-a.hypot(b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaSelection {
    /// Row-major replica index per pursuer, in `0..(2k+1)²`.
    pub replica_index_per_pursuer: Vec<usize>,
    /// Planar coordinates of each selected replica.
    pub replica_positions: Vec<[f64; 2]>,
    pub objective_value: f64,
    pub total_distance: f64,
    /// Number of joint selections evaluated.
    pub evaluated: u64,
}

struct ReplicaTerm {
    pos: [f64; 2],
    wx: f64,
    wy: f64,
    r: f64,
}

fn replica_terms(state: &WorldState, k: usize) -> Result<Vec<Vec<ReplicaTerm>>> {
    let e = state.evader.position.to_array();
    state
        .pursuers
        .iter()
        .map(|p| {
            replicate(p.position, k)
                .into_iter()
                .map(|pos| {
                    let dx = pos[0] - e[0];
                    let dy = pos[1] - e[1];
                    let d2 = dx * dx + dy * dy;
                    if d2 == 0.0 {
                        return Err(Error::Singularity("pursuer co-located with evader".into()));
                    }
                    Ok(ReplicaTerm {
                        pos,
                        wx: dx / d2,
                        wy: dy / d2,
                        r: d2.sqrt(),
                    })
                })
                .collect()
        })
        .collect()
}

/// Advances a mixed-radix counter; returns false after the last combination.
fn next_combination(digits: &mut [usize], radix: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < radix {
            return true;
        }
        *d = 0;
    }
    false
}

/// Exhaustive max-min replica selection.
///
/// Ties within [`PINCER_TIE_TOLERANCE`] of the best objective are broken by
/// the smallest total replica-evader distance, then by the lexicographically
/// smallest replica index vector.
pub fn pincer_select(state: &WorldState, k: usize) -> Result<ReplicaSelection> {
    let n = state.pursuers.len();
    if n == 0 {
        return Err(Error::EmptyInput("pincer needs at least one pursuer".into()));
    }
    let radix = (2 * k + 1) * (2 * k + 1);
    let total = (radix as u64)
        .checked_pow(n as u32)
        .filter(|&t| t <= MAX_PINCER_SELECTIONS)
        .ok_or_else(|| {
            Error::InvalidArgument(format!("pincer enumeration too large for n={n}, k={k}"))
        })?;
    let terms = replica_terms(state, k)?;

    let objective = |digits: &[usize]| {
        let (a, b) = digits
            .iter()
            .zip(&terms)
            .fold((0.0, 0.0), |(a, b), (&d, t)| (a + t[d].wx, b + t[d].wy));
        -a.hypot(b)
    };

    let mut digits = vec![0usize; n];
    let mut best = f64::NEG_INFINITY;
    let mut evaluated = 0u64;
    loop {
        best = best.max(objective(&digits));
        evaluated += 1;
        if !next_combination(&mut digits, radix) {
            break;
        }
    }
    debug_assert_eq!(evaluated, total);

    let mut chosen: Option<(Vec<usize>, f64, f64)> = None;
    digits.iter_mut().for_each(|d| *d = 0);
    loop {
        let value = objective(&digits);
        if value >= best - PINCER_TIE_TOLERANCE {
            let dist: f64 = digits.iter().zip(&terms).map(|(&d, t)| t[d].r).sum();
            if chosen.as_ref().is_none_or(|(_, _, best_dist)| dist < *best_dist) {
                chosen = Some((digits.clone(), value, dist));
            }
        }
        if !next_combination(&mut digits, radix) {
            break;
        }
    }
    let (indices, objective_value, total_distance) =
        chosen.expect("enumeration visits at least one selection");
    let replica_positions = indices.iter().zip(&terms).map(|(&d, t)| t[d].pos).collect();
    Ok(ReplicaSelection {
        replica_index_per_pursuer: indices,
        replica_positions,
        objective_value,
        total_distance,
        evaluated,
    })
}

/// Pincer headings: each pursuer heads from its selected replica straight
/// toward the evader in the unrolled plane.
pub fn pincer_headings(state: &WorldState, k: usize) -> Result<Vec<f64>> {
    let sel = pincer_select(state, k)?;
    let e = state.evader.position.to_array();
    Ok(sel
        .replica_positions
        .iter()
        .map(|r| normalize_angle((e[1] - r[1]).atan2(e[0] - r[0])))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angular_distance;
    use std::f64::consts::PI;

    fn pose(x: f64, y: f64) -> Pose {
        Pose::new(Point2::new(x, y).unwrap(), 0.0)
    }

    fn state(ps: &[(f64, f64)], e: (f64, f64)) -> WorldState {
        WorldState {
            pursuers: ps.iter().map(|&(x, y)| pose(x, y)).collect(),
            evader: pose(e.0, e.1),
            step: 0,
        }
    }

    #[test]
    fn greedy_examples() {
        let h = greedy_heading(&pose(0.0, 0.0), Point2::new(0.2, 0.0).unwrap()).unwrap();
        assert_eq!(h, 0.0);
        let h = greedy_heading(&pose(0.05, 0.5), Point2::new(0.95, 0.5).unwrap()).unwrap();
        assert!(angular_distance(h, PI) < 1e-12);
        let north = greedy_heading(&pose(0.5, 0.2), Point2::new(0.5, 0.4).unwrap()).unwrap();
        assert!((north - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn greedy_direction_ignores_gain() {
        let p = Point2::new(0.1, 0.7).unwrap();
        let g = Point2::new(0.8, 0.2).unwrap();
        let f1 = GreedyParams::new(1.5).unwrap().attractive_force(p, g);
        let f2 = GreedyParams::new(3.0).unwrap().attractive_force(p, g);
        assert_eq!(f1[1].atan2(f1[0]), f2[1].atan2(f2[0]));
        assert!((f2[0] - 2.0 * f1[0]).abs() < 1e-15);
        assert!(GreedyParams::new(0.0).is_err());
    }

    #[test]
    fn greedy_co_located_is_singular() {
        let r = greedy_heading(&pose(0.4, 0.4), Point2::new(0.4, 0.4).unwrap());
        assert!(matches!(r, Err(Error::Singularity(_))));
    }

    #[test]
    fn objective_examples() {
        let tri: Vec<[f64; 2]> = (0..3)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / 3.0;
                [t.cos(), t.sin()]
            })
            .collect();
        assert!(pincer_objective(&tri, [0.0, 0.0]).unwrap().abs() < 1e-15);
        assert_eq!(pincer_objective(&[[1.0, 0.0]], [0.0, 0.0]).unwrap(), -1.0);
        assert!(pincer_objective(&[[0.3, 0.3]], [0.3, 0.3]).is_err());
    }

    #[test]
    fn enumeration_size() {
        let s = state(&[(0.1, 0.1), (0.7, 0.2), (0.4, 0.9)], (0.5, 0.5));
        assert_eq!(pincer_select(&s, 1).unwrap().evaluated, 729);
        assert_eq!(pincer_select(&s, 2).unwrap().evaluated, 25u64.pow(3));
        let one = state(&[(0.1, 0.1)], (0.5, 0.5));
        assert_eq!(pincer_select(&one, 1).unwrap().evaluated, 9);
    }

    #[test]
    fn symmetric_triangle_keeps_center_tile() {
        let ps: Vec<(f64, f64)> = (0..3)
            .map(|i| {
                let t = PI / 2.0 + 2.0 * PI * i as f64 / 3.0;
                (0.5 + 0.15 * t.cos(), 0.5 + 0.15 * t.sin())
            })
            .collect();
        let s = state(&ps, (0.5, 0.5));
        let sel = pincer_select(&s, 1).unwrap();
        assert_eq!(sel.replica_index_per_pursuer, vec![4, 4, 4]);
        let hs = pincer_headings(&s, 1).unwrap();
        for (p, h) in s.pursuers.iter().zip(hs) {
            let inward = displacement(p.position, s.evader.position).bearing();
            assert!(angular_distance(h, inward) < 1e-12);
        }
    }

    #[test]
    fn single_pursuer_takes_farthest_image() {
        // With one pursuer the evader's best response is −1/r, so the
        // maximizer is the replica farthest from the evader.
        let s = state(&[(0.6, 0.5)], (0.5, 0.5));
        let sel = pincer_select(&s, 1).unwrap();
        let e = [0.5, 0.5];
        let far = replicate(s.pursuers[0].position, 1)
            .into_iter()
            .map(|r| (r[0] - e[0]).hypot(r[1] - e[1]))
            .fold(0.0, f64::max);
        assert!((sel.total_distance - far).abs() < 1e-12);
        let h = pincer_headings(&s, 1).unwrap()[0];
        let r = sel.replica_positions[0];
        assert!(angular_distance(h, (e[1] - r[1]).atan2(e[0] - r[0])) < 1e-12);
    }

    #[test]
    fn pincer_is_deterministic() {
        let s = state(&[(0.12, 0.81), (0.66, 0.23), (0.91, 0.47)], (0.33, 0.52));
        let a = pincer_headings(&s, 1).unwrap();
        let b = pincer_headings(&s, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oversized_enumeration_is_rejected() {
        let ps: Vec<(f64, f64)> = (0..8).map(|i| (0.1 * i as f64, 0.05)).collect();
        let s = state(&ps, (0.5, 0.5));
        assert!(matches!(pincer_select(&s, 3), Err(Error::InvalidArgument(_))));
    }
}
