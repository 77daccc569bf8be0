//! Dense multilayer perceptrons with hand-written reverse-mode gradients.
//!
//! Weights are stored row-major as `[out × in]`. Everything runs in `f64`.

pub mod gradcheck;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

/// One affine layer. Also used as the gradient / moment container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.bias)
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }
}

/// Parameters of a multilayer perceptron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

/// Partial derivatives, shape-congruent with an [`Mlp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

/// Activations recorded by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input fed to each layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation output of each layer.
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    /// Sign pattern of every hidden rectifier; changes mark kinks.
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.pre
            .iter()
            .take(self.pre.len().saturating_sub(1))
            .flat_map(|z| z.iter().map(|&v| v > 0.0))
            .collect()
    }
}

fn shape_error(expected: usize, got: usize) -> Error {
    Error::DimensionMismatch { expected, got }
}

impl Mlp {
    /// Fan-in scaled uniform weights on `±1/√fan_in`, zero biases.
    pub fn init<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "layer sizes must have at least two positive entries, got {sizes:?}"
            )));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let mut layer = Layer::zeros(fan_in, fan_out);
                for v in &mut layer.weights {
                    *v = rng.random_range(-bound..bound);
                }
                layer
            })
            .collect();
        Ok(Self {
            layers,
            hidden_activation,
            output_activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    /// Forward pass without recording activations.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(shape_error(self.input_dim(), input.len()));
        }
        let mut x = input.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let act = self.activation(l);
            x = affine(layer, &x).into_iter().map(|z| act.apply(z)).collect();
        }
        Ok(x)
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if input.len() != self.input_dim() {
            return Err(shape_error(self.input_dim(), input.len()));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = affine(layer, &x);
            let act = self.activation(l);
            let a = z.iter().map(|&v| act.apply(v)).collect();
            inputs.push(x);
            pre.push(z);
            x = a;
        }
        Ok((x, ForwardCache { inputs, pre }))
    }

    /// Gradients of `output · output_gradient` with respect to every
    /// parameter and to the input.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_gradient: &[f64],
    ) -> Result<(Gradients, Vec<f64>)> {
        let mut grads = Gradients::zeros_like(self);
        let input_grad = self.backward_into(cache, output_gradient, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Like [`Mlp::backward`] but accumulates into `grads`.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        output_gradient: &[f64],
        grads: &mut Gradients,
    ) -> Result<Vec<f64>> {
        if cache.pre.len() != self.layers.len() {
            return Err(shape_error(self.layers.len(), cache.pre.len()));
        }
        if output_gradient.len() != self.output_dim() {
            return Err(shape_error(self.output_dim(), output_gradient.len()));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(shape_error(self.layers.len(), grads.layers.len()));
        }
        let last = self.layers.len() - 1;
        let mut delta: Vec<f64> = output_gradient
            .iter()
            .zip(&cache.pre[last])
            .map(|(g, &z)| g * self.output_activation.derivative(z))
            .collect();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let x = &cache.inputs[l];
            let g = &mut grads.layers[l];
            for (o, &d) in delta.iter().enumerate() {
                g.bias[o] += d;
                if d != 0.0 {
                    let row = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (w, &xi) in row.iter_mut().zip(x) {
                        *w += d * xi;
                    }
                }
            }
            let mut dx = vec![0.0; layer.in_dim];
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (acc, &w) in dx.iter_mut().zip(row) {
                        *acc += w * d;
                    }
                }
            }
            if l == 0 {
                return Ok(dx);
            }
            let act = self.hidden_activation;
            delta = dx
                .into_iter()
                .zip(&cache.pre[l - 1])
                .map(|(v, &z)| v * act.derivative(z))
                .collect();
        }
        unreachable!("an MLP has at least one layer")
    }

    /// Gradient of `output · output_gradient` with respect to the input only.
    pub fn input_gradient(&self, cache: &ForwardCache, output_gradient: &[f64]) -> Result<Vec<f64>> {
        if cache.pre.len() != self.layers.len() {
            return Err(shape_error(self.layers.len(), cache.pre.len()));
        }
        if output_gradient.len() != self.output_dim() {
            return Err(shape_error(self.output_dim(), output_gradient.len()));
        }
        let last = self.layers.len() - 1;
        let mut delta: Vec<f64> = output_gradient
            .iter()
            .zip(&cache.pre[last])
            .map(|(g, &z)| g * self.output_activation.derivative(z))
            .collect();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let mut dx = vec![0.0; layer.in_dim];
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (acc, &w) in dx.iter_mut().zip(row) {
                        *acc += w * d;
                    }
                }
            }
            if l == 0 {
                return Ok(dx);
            }
            let act = self.hidden_activation;
            delta = dx
                .into_iter()
                .zip(&cache.pre[l - 1])
                .map(|(v, &z)| v * act.derivative(z))
                .collect();
        }
        unreachable!("an MLP has at least one layer")
    }

    fn check_congruent(&self, other: &[Layer]) -> Result<()> {
        if self.layers.len() != other.len() {
            return Err(shape_error(self.layers.len(), other.len()));
        }
        for (a, b) in self.layers.iter().zip(other) {
            if a.in_dim != b.in_dim || a.out_dim != b.out_dim {
                return Err(shape_error(a.weights.len(), b.weights.len()));
            }
        }
        Ok(())
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(Layer::values)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(Layer::values_mut)
    }

    /// Mutable access to parameter `index` in flattened layer order
    /// (weights then bias, layer by layer).
    pub fn param_mut(&mut self, index: usize) -> Option<&mut f64> {
        flat_mut(&mut self.layers, index)
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }
}

fn flat_mut(layers: &mut [Layer], mut index: usize) -> Option<&mut f64> {
    for layer in layers {
        let nw = layer.weights.len();
        if index < nw {
            return Some(&mut layer.weights[index]);
        }
        index -= nw;
        if index < layer.bias.len() {
            return Some(&mut layer.bias[index]);
        }
        index -= layer.bias.len();
    }
    None
}

fn affine(layer: &Layer, x: &[f64]) -> Vec<f64> {
    layer
        .weights
        .chunks_exact(layer.in_dim)
        .zip(&layer.bias)
        .map(|(row, b)| row.iter().zip(x).fold(*b, |acc, (w, xi)| acc + w * xi))
        .collect()
}

impl Gradients {
    pub fn zeros_like(params: &Mlp) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| Layer::zeros(l.in_dim, l.out_dim))
                .collect(),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(Layer::values)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(Layer::values_mut)
    }

    pub fn get(&self, mut index: usize) -> Option<f64> {
        for layer in &self.layers {
            let nw = layer.weights.len();
            if index < nw {
                return Some(layer.weights[index]);
            }
            index -= nw;
            if index < layer.bias.len() {
                return Some(layer.bias[index]);
            }
            index -= layer.bias.len();
        }
        None
    }

    pub fn scale(&mut self, factor: f64) {
        self.values_mut().for_each(|v| *v *= factor);
    }

    pub fn global_norm(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    /// Rescales so that the global L2 norm does not exceed `max_norm`.
    pub fn clip_global_norm(mut self, max_norm: f64) -> Result<Self> {
        if !(max_norm > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "max_norm must be positive, got {max_norm}"
            )));
        }
        let norm = self.global_norm();
        if norm > max_norm {
            self.scale(max_norm / norm);
        }
        Ok(self)
    }
}

/// Decay constants for [`Adam`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected adaptive-moment optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    pub first_moment: Gradients,
    pub second_moment: Gradients,
    pub steps: u64,
}

impl Adam {
    pub fn new(params: &Mlp, config: AdamConfig) -> Self {
        Self {
            config,
            first_moment: Gradients::zeros_like(params),
            second_moment: Gradients::zeros_like(params),
            steps: 0,
        }
    }

    /// Applies one descent step of `grads` to `params`.
    pub fn step(&mut self, params: &mut Mlp, grads: &Gradients, learning_rate: f64) -> Result<()> {
        params.check_congruent(&grads.layers)?;
        params.check_congruent(&self.first_moment.layers)?;
        self.steps += 1;
        let AdamConfig {
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.steps as i32);
        let c2 = 1.0 - beta2.powi(self.steps as i32);
        let moments = self
            .first_moment
            .values_mut()
            .zip(self.second_moment.values_mut());
        for ((p, &g), (m, v)) in params.values_mut().zip(grads.values()).zip(moments) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

/// `target ← (1 − τ)·target + τ·online`, entry by entry.
pub fn polyak_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("tau must lie in [0, 1], got {tau}")));
    }
    target.check_congruent(&online.layers)?;
    if tau == 0.0 {
        return Ok(());
    }
    for (t, &o) in target.values_mut().zip(online.values()) {
        *t = if tau == 1.0 { o } else { *t + tau * (o - *t) };
    }
    Ok(())
}
