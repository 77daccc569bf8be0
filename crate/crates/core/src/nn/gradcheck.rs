//! Central finite-difference checks for hand-written gradients.
//!
//! Coordinates whose ±h perturbation flips a rectifier are skipped: the
//! objective is not differentiable across the kink, so the difference
//! quotient says nothing about the analytic derivative there.

use rand::Rng;

use super::{ForwardCache, Gradients, Mlp};
use crate::error::{Error, Result};

pub const FD_STEP: f64 = 1e-5;

/// Denominator floor of [`relative_error`]; keeps derivatives that are zero
/// up to rounding from dominating the report.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

const MAX_SKIP_FACTOR: usize = 20;

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

/// A scalar objective value together with the rectifier pattern it used.
#[derive(Debug, Clone)]
pub struct Probe {
    pub value: f64,
    pub pattern: Vec<bool>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    pub skipped_kinks: usize,
}

impl GradCheckReport {
    pub fn merge(self, other: GradCheckReport) -> GradCheckReport {
        GradCheckReport {
            max_relative_error: self.max_relative_error.max(other.max_relative_error),
            checked: self.checked + other.checked,
            skipped_kinks: self.skipped_kinks + other.skipped_kinks,
        }
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.checked > 0 && self.max_relative_error < tolerance
    }
}

fn pick_indices<R: Rng + ?Sized>(total: usize, wanted: usize, rng: &mut R) -> Vec<usize> {
    if wanted >= total {
        (0..total).collect()
    } else {
        (0..wanted * MAX_SKIP_FACTOR)
            .map(|_| rng.random_range(0..total))
            .collect()
    }
}

/// Compares `analytic` parameter gradients against central differences of
/// `objective` on up to `coords` parameter coordinates.
pub fn check_parameters<R, F>(
    params: &Mlp,
    analytic: &Gradients,
    objective: F,
    coords: usize,
    rng: &mut R,
) -> Result<GradCheckReport>
where
    R: Rng + ?Sized,
    F: Fn(&Mlp) -> Result<Probe>,
{
    let base = objective(params)?;
    let total = params.num_params();
    let mut report = GradCheckReport::default();
    let mut probe = params.clone();
    for idx in pick_indices(total, coords, rng) {
        if report.checked >= coords {
            break;
        }
        let orig = *probe.param_mut(idx).expect("index in range");
        *probe.param_mut(idx).expect("index in range") = orig + FD_STEP;
        let plus = objective(&probe)?;
        *probe.param_mut(idx).expect("index in range") = orig - FD_STEP;
        let minus = objective(&probe)?;
        *probe.param_mut(idx).expect("index in range") = orig;
        if plus.pattern != base.pattern || minus.pattern != base.pattern {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (plus.value - minus.value) / (2.0 * FD_STEP);
        let a = analytic
            .get(idx)
            .ok_or(Error::IndexOutOfRange { index: idx, len: total })?;
        report.max_relative_error = report.max_relative_error.max(relative_error(a, numeric));
        report.checked += 1;
    }
    Ok(report)
}

/// Compares an analytic input gradient against central differences.
pub fn check_input<F>(input: &[f64], analytic: &[f64], objective: F) -> Result<GradCheckReport>
where
    F: Fn(&[f64]) -> Result<Probe>,
{
    if analytic.len() != input.len() {
        return Err(Error::DimensionMismatch {
            expected: input.len(),
            got: analytic.len(),
        });
    }
    let base = objective(input)?;
    let mut report = GradCheckReport::default();
    let mut x = input.to_vec();
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + FD_STEP;
        let plus = objective(&x)?;
        x[i] = orig - FD_STEP;
        let minus = objective(&x)?;
        x[i] = orig;
        if plus.pattern != base.pattern || minus.pattern != base.pattern {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (plus.value - minus.value) / (2.0 * FD_STEP);
        report.max_relative_error = report
            .max_relative_error
            .max(relative_error(analytic[i], numeric));
        report.checked += 1;
    }
    Ok(report)
}

/// Signature of a backward pass, so callers can check alternative or
/// deliberately broken implementations.
pub type BackwardFn<'a> =
    &'a dyn Fn(&Mlp, &ForwardCache, &[f64]) -> Result<(Gradients, Vec<f64>)>;

/// Checks `backward` for the objective `forward(x) · output_gradient`.
pub fn check_mlp_backward<R: Rng + ?Sized>(
    net: &Mlp,
    input: &[f64],
    output_gradient: &[f64],
    backward: BackwardFn<'_>,
    coords: usize,
    rng: &mut R,
) -> Result<GradCheckReport> {
    let dot = |y: &[f64]| -> f64 { y.iter().zip(output_gradient).map(|(a, b)| a * b).sum() };
    let (_, cache) = net.forward(input)?;
    let (grads, input_grad) = backward(net, &cache, output_gradient)?;
    let by_params = check_parameters(
        net,
        &grads,
        |m| {
            let (y, c) = m.forward(input)?;
            Ok(Probe {
                value: dot(&y),
                pattern: c.activation_pattern(),
            })
        },
        coords,
        rng,
    )?;
    let by_input = check_input(input, &input_grad, |x| {
        let (y, c) = net.forward(x)?;
        Ok(Probe {
            value: dot(&y),
            pattern: c.activation_pattern(),
        })
    })?;
    Ok(by_params.merge(by_input))
}

/// The library backward pass in [`BackwardFn`] form.
pub fn library_backward(
    net: &Mlp,
    cache: &ForwardCache,
    output_gradient: &[f64],
) -> Result<(Gradients, Vec<f64>)> {
    net.backward(cache, output_gradient)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((relative_error(1e-12, 0.0) - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn library_backward_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::init(&[6, 32, 32, 3], Activation::Relu, Activation::Identity, &mut rng)
            .unwrap();
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = check_mlp_backward(&net, &x, &g, &library_backward, 200, &mut rng).unwrap();
        assert!(r.passes(1e-4), "{r:?}");
        assert!(r.checked >= 200);
    }

    #[test]
    fn perturbed_backward_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::init(&[4, 16, 2], Activation::Relu, Activation::Identity, &mut rng)
            .unwrap();
        let broken = |n: &Mlp, c: &ForwardCache, g: &[f64]| {
            let (mut grads, dx) = n.backward(c, g)?;
            grads.scale(1.01);
            Ok((grads, dx))
        };
        let r = check_mlp_backward(&net, &[0.3, -0.2, 0.9, 0.1], &[1.0, -0.5], &broken, 50, &mut rng)
            .unwrap();
        assert!(!r.passes(1e-4), "{r:?}");
    }
}
