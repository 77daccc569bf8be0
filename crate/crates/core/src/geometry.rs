//! Geometry of the unit torus `[0, 1)²`.
//!
//! Every position lives in the unit square with periodic boundaries. Offsets
//! between points are always the minimal wrapped displacement, with each
//! component in the half-open interval `[-0.5, 0.5)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A position on the unit torus. Both coordinates lie in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    x: f64,
    y: f64,
}

/// Minimal wrapped offset between two torus points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Displacement2 {
    pub dx: f64,
    pub dy: f64,
}

impl Point2 {
    /// Wraps an arbitrary finite planar point onto the torus.
    pub fn new(x: f64, y: f64) -> Result<Self> {
        wrap([x, y])
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.x, self.y]
    }

    /// Moves the point by `(dx, dy)` and wraps the result.
    pub fn translate(self, dx: f64, dy: f64) -> Result<Self> {
        wrap([self.x + dx, self.y + dy])
    }
}

impl Displacement2 {
    pub fn norm(&self) -> f64 {
        self.dx.hypot(self.dy)
    }

    /// Bearing of the offset in `[-π, π)`.
    pub fn bearing(&self) -> f64 {
        normalize_angle(self.dy.atan2(self.dx))
    }
}

fn wrap_unit(v: f64) -> f64 {
    let w = v.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs.
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Reduces a coordinate difference in `(-1, 1)` to `[-0.5, 0.5)`.
fn wrap_half(v: f64) -> f64 {
    if v >= 0.5 {
        v - 1.0
    } else if v < -0.5 {
        v + 1.0
    } else {
        v
    }
}

/// Maps a finite planar point into `[0, 1)²` by modular reduction.
pub fn wrap(p: [f64; 2]) -> Result<Point2> {
    if !p[0].is_finite() || !p[1].is_finite() {
        return Err(Error::InvalidArgument(format!(
            "cannot wrap non-finite point ({}, {})",
            p[0], p[1]
        )));
    }
    Ok(Point2 {
        x: wrap_unit(p[0]),
        y: wrap_unit(p[1]),
    })
}

/// Minimal wrapped offset from `from` to `to`. Exact ties at 0.5 map to -0.5.
pub fn displacement(from: Point2, to: Point2) -> Displacement2 {
    Displacement2 {
        dx: wrap_half(to.x - from.x),
        dy: wrap_half(to.y - from.y),
    }
}

/// Torus (wrapped Euclidean) distance.
pub fn distance(a: Point2, b: Point2) -> f64 {
    displacement(a, b).norm()
}

/// Translates `p` by every integer offset `(i, j)` with `-k <= i, j <= k`.
///
/// The result is ordered row-major over `(i, j)`, so the center replica sits
/// at index `(2k + 1)² / 2`.
pub fn replicate(p: Point2, k: usize) -> Vec<[f64; 2]> {
    let k = k as i64;
    let mut out = Vec::with_capacity(((2 * k + 1) * (2 * k + 1)) as usize);
    for i in -k..=k {
        for j in -k..=k {
            out.push([p.x + i as f64, p.y + j as f64]);
        }
    }
    out
}

/// Normalizes an angle into `[-π, π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        return theta;
    }
    let two_pi = 2.0 * PI;
    let mut t = (theta + PI).rem_euclid(two_pi) - PI;
    if t >= PI {
        t -= two_pi;
    }
    t
}

/// Absolute angular difference in `[0, π]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs()
}
