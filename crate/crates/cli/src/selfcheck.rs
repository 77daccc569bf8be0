//! Built-in correctness checks runnable from the command line.

use std::f64::consts::{FRAC_PI_2, PI};

use pursuit_core::curriculum::{velocity_at_epoch, VelocitySchedule};
use pursuit_core::evader::{evade_cost, minimizing_heading, PolarContact};
use pursuit_core::geometry::angular_distance;
use pursuit_core::metrics::{ActionHistogram, ActionLog, instantaneous_coordination};
use pursuit_core::nn::gradcheck::{check_mlp_backward, library_backward, BackwardFn};
use pursuit_core::nn::{Activation, Mlp};
use pursuit_core::pursuit::pincer_objective;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

fn unit_contacts(bearings: &[f64]) -> Vec<PolarContact> {
    bearings
        .iter()
        .map(|&b| PolarContact::new(1.0, b).expect("unit radius is valid"))
        .collect()
}

/// The two reference evader cases: `(name, bearings, expected heading)`.
pub fn evader_cases() -> [(&'static str, [f64; 3], f64); 2] {
    [
        ("evader case 1", [0.0, FRAC_PI_2, PI], -FRAC_PI_2),
        ("evader case 2", [0.0, FRAC_PI_2, -FRAC_PI_2], PI),
    ]
}

pub fn evader_checks() -> Vec<Check> {
    evader_cases()
        .into_iter()
        .map(|(name, bearings, expected)| match minimizing_heading(&unit_contacts(&bearings)) {
            Some(h) => Check::new(
                name,
                angular_distance(h, expected) < 1e-9,
                format!("heading {h:.12}, expected {expected:.12} (mod 2π)"),
            ),
            None => Check::new(name, false, "degenerate resultant".into()),
        })
        .collect()
}

/// Minimum of the evader cost over a uniform heading grid.
pub fn grid_min(contacts: &[PolarContact], points: usize) -> f64 {
    (0..points)
        .map(|i| -PI + 2.0 * PI * i as f64 / points as f64)
        .map(|t| evade_cost(t, contacts).expect("finite heading"))
        .fold(f64::INFINITY, f64::min)
}

/// Grid minimum polished by golden-section search within one cell of the
/// best grid point.
pub fn refined_grid_min(contacts: &[PolarContact], points: usize) -> f64 {
    let step = 2.0 * PI / points as f64;
    let cost = |t: f64| evade_cost(t, contacts).expect("finite heading");
    let best = (0..points)
        .map(|i| -PI + step * i as f64)
        .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
        .expect("nonempty grid");
    let (mut lo, mut hi) = (best - step, best + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if cost(m1) < cost(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    cost(0.5 * (lo + hi)).min(cost(best))
}

/// Random evader-centered states with three planar replicas, as contacts.
pub fn random_replica_state(rng: &mut ChaCha8Rng) -> ([f64; 2], Vec<[f64; 2]>, Vec<PolarContact>) {
    let e = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
    let replicas: Vec<[f64; 2]> = (0..3)
        .map(|_| [rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0)])
        .collect();
    let cs = replicas
        .iter()
        .map(|r| {
            let (dx, dy) = (r[0] - e[0], r[1] - e[1]);
            PolarContact::new(dx.hypot(dy), dy.atan2(dx)).expect("nonzero distance")
        })
        .collect();
    (e, replicas, cs)
}

fn evader_optimality(sets: usize, rng: &mut ChaCha8Rng) -> Check {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..sets {
        let n = rng.random_range(1..=4);
        let cs: Vec<_> = (0..n)
            .map(|_| {
                PolarContact::new(rng.random_range(0.05..0.7), rng.random_range(-PI..PI))
                    .expect("positive radius")
            })
            .collect();
        let Some(h) = minimizing_heading(&cs) else { continue };
        let gap = evade_cost(h, &cs).expect("finite heading") - grid_min(&cs, 10_000);
        worst = worst.max(gap);
    }
    Check::new(
        "evader closed form vs grid",
        worst <= 1e-9,
        format!("worst cost excess over grid minimum {worst:.3e} on {sets} sets"),
    )
}

fn pincer_identity(states: usize, rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..states {
        let (e, replicas, cs) = random_replica_state(rng);
        let closed = pincer_objective(&replicas, e).expect("nonzero distance");
        worst = worst.max((closed - refined_grid_min(&cs, 10_000)).abs());
    }
    Check::new(
        "pincer closed form vs grid",
        worst < 1e-6,
        format!("max deviation {worst:.3e} on {states} states"),
    )
}

fn perturbed_backward(
    net: &Mlp,
    cache: &pursuit_core::nn::ForwardCache,
    og: &[f64],
) -> pursuit_core::Result<(pursuit_core::nn::Gradients, Vec<f64>)> {
    let (mut g, x) = net.backward(cache, og)?;
    g.scale(1.01);
    Ok((g, x))
}

/// Gradient check of `backward` on random probes of every network shape.
pub fn gradient_check(config: &ExperimentConfig, backward: BackwardFn<'_>, probes: usize, seed: u64) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.env.n_pursuers;
    let mut shapes = Vec::new();
    for obs in [2 + 2 * n, 4] {
        let mut actor = vec![obs];
        actor.extend(&config.ddpg.actor_hidden);
        actor.push(2);
        let mut critic = vec![obs + 2];
        critic.extend(&config.ddpg.critic_hidden);
        critic.push(1);
        shapes.push(actor);
        shapes.push(critic);
    }
    let mut worst = 0.0f64;
    let mut all_pass = true;
    for sizes in &shapes {
        let mut report: Option<pursuit_core::nn::gradcheck::GradCheckReport> = None;
        for _ in 0..probes {
            let net = Mlp::init(sizes, Activation::Relu, Activation::Identity, &mut rng)
                .expect("valid sizes");
            let x: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
            let og: Vec<f64> = (0..*sizes.last().expect("nonempty"))
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let r = check_mlp_backward(&net, &x, &og, backward, 10, &mut rng)
                .expect("matching dimensions");
            report = Some(report.map_or(r, |acc| acc.merge(r)));
        }
        let r = report.expect("at least one probe");
        worst = worst.max(r.max_relative_error);
        all_pass &= r.passes(1e-4);
    }
    (all_pass, format!("max relative error {worst:.3e} over {} shapes", shapes.len()))
}

fn schedule_check() -> Check {
    let s = VelocitySchedule::new(1.2, 0.4, 15_000).expect("valid schedule");
    let expect = [(0, 1.2), (7_500, 0.8), (15_000, 0.4), (22_500, 0.4)];
    let worst = expect
        .iter()
        .map(|&(i, v)| (velocity_at_epoch(&s, i) - v).abs())
        .fold(0.0, f64::max);
    Check::new(
        "velocity schedule",
        worst < 1e-12,
        format!("max deviation {worst:.3e} at epochs 0, 7500, 15000, 22500"),
    )
}

fn mi_checks(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let h = ActionHistogram::from_counts(2, vec![40, 10, 10, 40]).expect("2x2 table");
    let direct = 2.0 * 0.4 * (0.4f64 / 0.25).log2() + 2.0 * 0.1 * (0.1f64 / 0.25).log2();
    let hand = h.mutual_information().expect("nonempty");

    let bins = 16;
    let center = |b: usize| -PI + (b as f64 + 0.5) * 2.0 * PI / bins as f64;
    let headings: Vec<Vec<f64>> = (0..=bins * 200)
        .map(|t| vec![center(t % bins), if t == 0 { 0.0 } else { center((t - 1) % bins) }])
        .collect();
    let copy = instantaneous_coordination(&[ActionLog { headings }], 0, 1, bins).expect("pairs");

    let headings: Vec<Vec<f64>> = (0..=50_000)
        .map(|_| vec![rng.random_range(-PI..PI), rng.random_range(-PI..PI)])
        .collect();
    let indep = instantaneous_coordination(&[ActionLog { headings }], 0, 1, bins).expect("pairs");
    vec![
        Check::new(
            "mi hand table",
            (hand - direct).abs() < 1e-12,
            format!("{hand:.15} vs direct {direct:.15}"),
        ),
        Check::new("mi deterministic copy", (copy - 4.0).abs() < 0.01, format!("{copy:.6} bits")),
        Check::new("mi independent", indep < 0.05, format!("{indep:.6} bits")),
    ]
}

/// Runs every check.
pub fn selfcheck(config: &ExperimentConfig) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.run.seed);
    let mut checks = evader_checks();
    checks.push(evader_optimality(200, &mut rng));
    checks.push(pincer_identity(200, &mut rng));
    let (ok, detail) = gradient_check(config, &library_backward, 5, config.run.seed);
    checks.push(Check::new("backward vs finite differences", ok, detail));
    let (bad_ok, detail) = gradient_check(config, &perturbed_backward, 1, config.run.seed);
    checks.push(Check::new(
        "gradient check rejects a perturbed backward pass",
        !bad_ok,
        detail,
    ));
    checks.push(schedule_check());
    checks.extend(mi_checks(&mut rng));
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evader_cases_pass() {
        assert!(evader_checks().iter().all(|c| c.passed));
    }

    #[test]
    fn perturbed_backward_is_caught() {
        let mut config = ExperimentConfig::default();
        config.ddpg.actor_hidden = vec![8, 8];
        config.ddpg.critic_hidden = vec![8, 8, 8];
        assert!(gradient_check(&config, &library_backward, 3, 1).0);
        assert!(!gradient_check(&config, &perturbed_backward, 3, 1).0);
    }
}
