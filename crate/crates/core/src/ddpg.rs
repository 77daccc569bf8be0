//! Decentralized deep deterministic policy gradient.
//!
//! Each pursuer owns an [`AgentLearner`]: actor, critic, their target copies,
//! optimizer state, exploration noise and a private replay buffer. Nothing in
//! here reads another agent's state.
//!
//! The actor emits a raw 2-vector `u`; the action is the unit vector
//! `a = u / ‖u‖` and the heading is its angle. The critic scores
//! `Q(obs ++ a)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::normalize_angle;
use crate::nn::{polyak_update, Activation, Adam, AdamConfig, Gradients, Mlp};

/// Raw actor outputs shorter than this map to the fixed action `(1, 0)`.
pub const MIN_ACTION_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DdpgConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub tau: f64,
    pub clip_norm: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    pub adam: AdamConfig,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            actor_hidden: vec![128, 128],
            critic_hidden: vec![128, 128, 128],
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            gamma: 0.99,
            tau: 0.001,
            clip_norm: 0.5,
            buffer_capacity: 500_000,
            batch_size: 512,
            ou_theta: 0.15,
            ou_sigma: 0.2,
            adam: AdamConfig::default(),
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.actor_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return bad("hidden layer sizes must be positive".into());
        }
        for (name, lr) in [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr)] {
            if !(lr > 0.0) || !lr.is_finite() {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad("tau must lie in [0, 1]".into());
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive".into());
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("need 0 < batch_size <= buffer_capacity".into());
        }
        if !(self.ou_theta >= 0.0) || !(self.ou_sigma >= 0.0) {
            return bad("OU parameters must be non-negative".into());
        }
        let AdamConfig { beta1, beta2, epsilon } = self.adam;
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(epsilon > 0.0) {
            return bad("adam needs beta1, beta2 in [0, 1) and epsilon > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Vec<f64>,
    /// Unit vector `(cos θ, sin θ)` of the executed heading.
    pub action: [f64; 2],
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// True only when the episode ended by capture, never on timeout.
    pub terminal: bool,
}

impl Transition {
    pub fn new(
        obs: Vec<f64>,
        heading: f64,
        reward: f64,
        next_obs: Vec<f64>,
        terminal: bool,
    ) -> Result<Self> {
        if obs.len() != next_obs.len() {
            return Err(Error::DimensionMismatch {
                expected: obs.len(),
                got: next_obs.len(),
            });
        }
        if !heading.is_finite() || !reward.is_finite() {
            return Err(Error::InvalidArgument("transition values must be finite".into()));
        }
        Ok(Self {
            obs,
            action: [heading.cos(), heading.sin()],
            reward,
            next_obs,
            terminal,
        })
    }
}

/// Fixed-capacity FIFO ring of transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    /// Slot overwritten by the next push once full.
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            items: Vec::new(),
            next: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
            self.next = (self.next + 1) % self.capacity;
        }
    }

    /// Stored transitions from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.items.split_at(self.next);
        older.iter().chain(newer)
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if batch_size == 0 || self.items.len() < batch_size {
            return Err(Error::NotReady {
                have: self.items.len(),
                need: batch_size.max(1),
            });
        }
        Ok((0..batch_size)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect())
    }
}

/// Discrete Ornstein-Uhlenbeck process with zero mean and unit time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuNoise {
    pub state: [f64; 2],
    pub theta: f64,
    pub sigma: f64,
}

impl OuNoise {
    pub fn new(theta: f64, sigma: f64) -> Self {
        Self {
            state: [0.0; 2],
            theta,
            sigma,
        }
    }

    pub fn reset(&mut self) {
        self.state = [0.0; 2];
    }

    /// `x ← x − θ·x + σ·g` with `g` standard normal per component.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> [f64; 2] {
        for x in &mut self.state {
            let g: f64 = rng.sample(StandardNormal);
            *x += self.theta * (0.0 - *x) + self.sigma * g;
        }
        self.state
    }
}

/// Projects a raw 2-vector onto the unit circle.
pub fn normalize_action(u: &[f64]) -> [f64; 2] {
    let n = u[0].hypot(u[1]);
    if n < MIN_ACTION_NORM {
        [1.0, 0.0]
    } else {
        [u[0] / n, u[1] / n]
    }
}

/// Chains `dL/da` through `a = u/‖u‖`: `dL/du = (I − a aᵀ) dL/da / ‖u‖`.
pub fn normalize_action_vjp(u: &[f64], grad_a: &[f64]) -> [f64; 2] {
    let n = u[0].hypot(u[1]);
    if n < MIN_ACTION_NORM {
        return [0.0, 0.0];
    }
    let a = [u[0] / n, u[1] / n];
    let dot = a[0] * grad_a[0] + a[1] * grad_a[1];
    [(grad_a[0] - a[0] * dot) / n, (grad_a[1] - a[1] * dot) / n]
}

pub fn heading_of(action: [f64; 2]) -> f64 {
    normalize_angle(action[1].atan2(action[0]))
}

fn critic_input(obs: &[f64], action: &[f64; 2]) -> Vec<f64> {
    let mut v = Vec::with_capacity(obs.len() + 2);
    v.extend_from_slice(obs);
    v.extend_from_slice(action);
    v
}

/// Statistics of one learner update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentLearner {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
    pub noise: OuNoise,
    pub buffer: ReplayBuffer,
    pub config: DdpgConfig,
}

impl AgentLearner {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, config: DdpgConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if obs_dim == 0 {
            return Err(Error::InvalidArgument("observation dimension must be positive".into()));
        }
        let actor_sizes: Vec<usize> = std::iter::once(obs_dim)
            .chain(config.actor_hidden.iter().copied())
            .chain(std::iter::once(2))
            .collect();
        let critic_sizes: Vec<usize> = std::iter::once(obs_dim + 2)
            .chain(config.critic_hidden.iter().copied())
            .chain(std::iter::once(1))
            .collect();
        let actor = Mlp::init(&actor_sizes, Activation::Relu, Activation::Identity, rng)?;
        let critic = Mlp::init(&critic_sizes, Activation::Relu, Activation::Identity, rng)?;
        Ok(Self {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor_opt: Adam::new(&actor, config.adam),
            critic_opt: Adam::new(&critic, config.adam),
            noise: OuNoise::new(config.ou_theta, config.ou_sigma),
            buffer: ReplayBuffer::new(config.buffer_capacity)?,
            actor,
            critic,
            config,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    fn check_obs(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.obs_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.obs_dim(),
                got: obs.len(),
            });
        }
        Ok(())
    }

    /// Unit action vector of the deterministic policy.
    pub fn action_vector(&self, obs: &[f64]) -> Result<[f64; 2]> {
        self.check_obs(obs)?;
        Ok(normalize_action(&self.actor.predict(obs)?))
    }

    /// Deterministic heading.
    pub fn act(&self, obs: &[f64]) -> Result<f64> {
        Ok(heading_of(self.action_vector(obs)?))
    }

    /// Heading of `μ(obs) + N` where `N` is the OU noise state.
    pub fn act_explore<R: Rng + ?Sized>(&mut self, obs: &[f64], rng: &mut R) -> Result<f64> {
        self.check_obs(obs)?;
        let u = self.actor.predict(obs)?;
        let x = self.noise.sample(rng);
        Ok(heading_of(normalize_action(&[u[0] + x[0], u[1] + x[1]])))
    }

    pub fn reset_noise(&mut self) {
        self.noise.reset();
    }

    pub fn remember(&mut self, t: Transition) -> Result<()> {
        self.check_obs(&t.obs)?;
        self.buffer.push(t);
        Ok(())
    }

    fn check_batch(&self, batch: &[&Transition]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("update batch is empty".into()));
        }
        for t in batch {
            self.check_obs(&t.obs)?;
            self.check_obs(&t.next_obs)?;
        }
        Ok(())
    }

    /// Bootstrapped regression target `r + γ(1 − terminal)·Q'(s', μ'(s'))`.
    pub fn critic_target_value(&self, t: &Transition) -> Result<f64> {
        if t.terminal {
            return Ok(t.reward);
        }
        let a_next = normalize_action(&self.actor_target.predict(&t.next_obs)?);
        let q_next = self.critic_target.predict(&critic_input(&t.next_obs, &a_next))?[0];
        Ok(t.reward + self.config.gamma * q_next)
    }

    /// Mean squared TD error and its gradient with respect to the critic.
    pub fn critic_loss_and_gradient(&self, batch: &[&Transition]) -> Result<(f64, Gradients)> {
        self.check_batch(batch)?;
        let scale = 1.0 / batch.len() as f64;
        let mut grads = Gradients::zeros_like(&self.critic);
        let mut loss = 0.0;
        for t in batch {
            let y = self.critic_target_value(t)?;
            let (q, cache) = self.critic.forward(&critic_input(&t.obs, &t.action))?;
            let diff = q[0] - y;
            loss += diff * diff * scale;
            self.critic.backward_into(&cache, &[2.0 * diff * scale], &mut grads)?;
        }
        Ok((loss, grads))
    }

    /// One clipped gradient step on the critic; returns the pre-update loss.
    pub fn critic_update(&mut self, batch: &[&Transition]) -> Result<f64> {
        let (loss, grads) = self.critic_loss_and_gradient(batch)?;
        let grads = grads.clip_global_norm(self.config.clip_norm)?;
        self.critic_opt
            .step(&mut self.critic, &grads, self.config.critic_lr)?;
        Ok(loss)
    }

    /// Mean of `Q(s, μ(s))` over the batch and its gradient with respect to
    /// the actor parameters (the deterministic policy gradient).
    pub fn actor_objective_and_gradient(&self, batch: &[&Transition]) -> Result<(f64, Gradients)> {
        self.check_batch(batch)?;
        let scale = 1.0 / batch.len() as f64;
        let obs_dim = self.obs_dim();
        let mut grads = Gradients::zeros_like(&self.actor);
        let mut mean_q = 0.0;
        for t in batch {
            let (u, actor_cache) = self.actor.forward(&t.obs)?;
            let a = normalize_action(&u);
            let (q, critic_cache) = self.critic.forward(&critic_input(&t.obs, &a))?;
            mean_q += q[0] * scale;
            let d_input = self.critic.input_gradient(&critic_cache, &[scale])?;
            let d_u = normalize_action_vjp(&u, &d_input[obs_dim..]);
            self.actor.backward_into(&actor_cache, &d_u, &mut grads)?;
        }
        Ok((mean_q, grads))
    }

    /// One clipped ascent step on the actor; returns the pre-update mean Q.
    pub fn actor_update(&mut self, batch: &[&Transition]) -> Result<f64> {
        let (mean_q, mut grads) = self.actor_objective_and_gradient(batch)?;
        // The optimizer descends, so hand it the gradient of −J.
        grads.scale(-1.0);
        let grads = grads.clip_global_norm(self.config.clip_norm)?;
        self.actor_opt.step(&mut self.actor, &grads, self.config.actor_lr)?;
        Ok(mean_q)
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        polyak_update(&mut self.actor_target, &self.actor, self.config.tau)?;
        polyak_update(&mut self.critic_target, &self.critic, self.config.tau)
    }

    /// Critic update, actor update and target soft-update on one sampled
    /// batch, or `None` while the buffer holds fewer than `batch_size` items.
    pub fn train_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<UpdateStats>> {
        if self.buffer.len() < self.config.batch_size {
            return Ok(None);
        }
        let buffer = std::mem::replace(&mut self.buffer, ReplayBuffer::new(1)?);
        let result = (|| {
            let batch = buffer.sample(self.config.batch_size, rng)?;
            let critic_loss = self.critic_update(&batch)?;
            let actor_q = self.actor_update(&batch)?;
            self.soft_update_targets()?;
            Ok(UpdateStats { critic_loss, actor_q })
        })();
        self.buffer = buffer;
        result.map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn tiny_config() -> DdpgConfig {
        DdpgConfig {
            actor_hidden: vec![8],
            critic_hidden: vec![8],
            batch_size: 4,
            buffer_capacity: 64,
            ..DdpgConfig::default()
        }
    }

    fn transition(obs: Vec<f64>, h: f64, r: f64, terminal: bool) -> Transition {
        let next = obs.iter().map(|v| v * 0.5).collect();
        Transition::new(obs, h, r, next, terminal).unwrap()
    }

    #[test]
    fn defaults_match_reference_values() {
        let c = DdpgConfig::default();
        assert_eq!(c.actor_lr, 1e-4);
        assert_eq!(c.critic_lr, 1e-3);
        assert_eq!(c.clip_norm, 0.5);
        assert_eq!(c.tau, 0.001);
        assert_eq!(c.buffer_capacity, 500_000);
        assert_eq!(c.batch_size, 512);
        assert_eq!(c.gamma, 0.99);
        assert_eq!(c.actor_hidden, vec![128, 128]);
        assert_eq!(c.critic_hidden, vec![128, 128, 128]);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn buffer_is_fifo() {
        let mut b = ReplayBuffer::new(3).unwrap();
        for i in 0..4 {
            b.push(transition(vec![i as f64], 0.0, i as f64, false));
        }
        assert_eq!(b.len(), 3);
        let rewards: Vec<f64> = b.iter_oldest_first().map(|t| t.reward).collect();
        assert_eq!(rewards, vec![1.0, 2.0, 3.0]);
        b.push(transition(vec![9.0], 0.0, 4.0, false));
        let rewards: Vec<f64> = b.iter_oldest_first().map(|t| t.reward).collect();
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn buffer_sampling() {
        let mut b = ReplayBuffer::new(10).unwrap();
        assert!(matches!(
            b.sample(2, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::NotReady { have: 0, need: 2 })
        ));
        for i in 0..10 {
            b.push(transition(vec![0.0], 0.0, i as f64, false));
        }
        let a: Vec<f64> = b
            .sample(8, &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap()
            .iter()
            .map(|t| t.reward)
            .collect();
        let c: Vec<f64> = b
            .sample(8, &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap()
            .iter()
            .map(|t| t.reward)
            .collect();
        assert_eq!(a, c);
    }

    #[test]
    fn buffer_sampling_is_uniform() {
        let mut b = ReplayBuffer::new(10).unwrap();
        for i in 0..10 {
            b.push(transition(vec![0.0], 0.0, i as f64, false));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut counts = [0usize; 10];
        let draws = 100_000;
        for _ in 0..draws / 10 {
            for t in b.sample(10, &mut rng).unwrap() {
                counts[t.reward as usize] += 1;
            }
        }
        let p: f64 = 0.1;
        let se = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * p).abs() < 3.0 * se, "{counts:?}");
        }
    }

    #[test]
    fn normalization_head() {
        assert_eq!(heading_of(normalize_action(&[0.0, 1.0])), PI / 2.0);
        let a = heading_of(normalize_action(&[-3.0, 0.0]));
        let b = heading_of(normalize_action(&[-0.5, 0.0]));
        assert_eq!(a, b);
        assert!((a.abs() - PI).abs() < 1e-15);
        assert_eq!(normalize_action(&[0.0, 1e-13]), [1.0, 0.0]);
        assert_eq!(normalize_action_vjp(&[0.0, 1e-13], &[1.0, 1.0]), [0.0, 0.0]);
    }

    #[test]
    fn normalization_vjp_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = 1e-7;
        for _ in 0..1000 {
            let u: [f64; 2] = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            if u[0].hypot(u[1]) < 1e-3 {
                continue;
            }
            let g = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let an = normalize_action_vjp(&u, &g);
            for k in 0..2 {
                let mut up = u;
                up[k] += h;
                let mut um = u;
                um[k] -= h;
                let fp = normalize_action(&up);
                let fm = normalize_action(&um);
                let fd = ((fp[0] - fm[0]) * g[0] + (fp[1] - fm[1]) * g[1]) / (2.0 * h);
                assert!((fd - an[k]).abs() < 1e-6, "u={u:?} fd={fd} an={}", an[k]);
            }
        }
    }

    #[test]
    fn ou_noiseless_limit_and_reset() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut l = AgentLearner::new(
            3,
            DdpgConfig {
                ou_sigma: 0.0,
                ..tiny_config()
            },
            &mut rng,
        )
        .unwrap();
        let obs = [0.1, 0.2, -0.3];
        for _ in 0..5 {
            assert_eq!(l.act_explore(&obs, &mut rng).unwrap(), l.act(&obs).unwrap());
        }
        l.noise.state = [0.4, 0.2];
        l.reset_noise();
        assert_eq!(l.noise.state, [0.0, 0.0]);
    }

    #[test]
    fn ou_long_run_mean_is_zero() {
        let mut n = OuNoise::new(0.15, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let steps = 100_000;
        let mut sum = [0.0; 2];
        let mut sq = [0.0; 2];
        for _ in 0..steps {
            let x = n.sample(&mut rng);
            for k in 0..2 {
                sum[k] += x[k];
                sq[k] += x[k] * x[k];
            }
        }
        // Stationary AR(1) variance σ²/(1 − (1−θ)²); autocorrelation
        // inflates the standard error of the mean by √((1+ρ)/(1−ρ)).
        let rho: f64 = 1.0 - 0.15;
        let var = 0.2f64.powi(2) / (1.0 - rho * rho);
        let se = (var / steps as f64 * (1.0 + rho) / (1.0 - rho)).sqrt();
        for k in 0..2 {
            let mean = sum[k] / steps as f64;
            assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
            let emp_var = sq[k] / steps as f64 - mean * mean;
            assert!((emp_var / var - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn explore_is_deterministic_per_seed() {
        let mut init = ChaCha8Rng::seed_from_u64(3);
        let base = AgentLearner::new(4, tiny_config(), &mut init).unwrap();
        let run = |seed| {
            let mut l = base.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|i| l.act_explore(&[0.1 * i as f64, 0.2, 0.3, 0.4], &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(8), run(8));
        assert_ne!(run(8), run(9));
    }

    #[test]
    fn terminal_masks_bootstrap() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let l = AgentLearner::new(2, tiny_config(), &mut rng).unwrap();
        let t = transition(vec![0.3, 0.1], 0.5, 50.0, true);
        assert_eq!(l.critic_target_value(&t).unwrap(), 50.0);
        let t = transition(vec![0.3, 0.1], 0.5, -0.1, false);
        assert_ne!(l.critic_target_value(&t).unwrap(), -0.1);
    }

    /// Tiny hand-set networks: actor obs(1) → 2 linear, critic (1+2) → 1 linear.
    fn hand_built(gamma: f64) -> AgentLearner {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = DdpgConfig {
            actor_hidden: vec![],
            critic_hidden: vec![],
            gamma,
            batch_size: 1,
            buffer_capacity: 4,
            ..DdpgConfig::default()
        };
        let mut l = AgentLearner::new(1, cfg, &mut rng).unwrap();
        l.actor.layers[0].weights = vec![1.0, 2.0];
        l.actor.layers[0].bias = vec![0.5, -0.5];
        l.critic.layers[0].weights = vec![0.3, -0.7, 1.1];
        l.critic.layers[0].bias = vec![0.2];
        l.actor_target = l.actor.clone();
        l.critic_target = l.critic.clone();
        l
    }

    #[test]
    fn critic_loss_matches_hand_computation() {
        let l = hand_built(0.9);
        let t = Transition {
            obs: vec![0.4],
            action: [0.6, 0.8],
            reward: -0.1,
            next_obs: vec![1.0],
            terminal: false,
        };
        // Target: u' = (1.5, 1.5) → a' = (1/√2, 1/√2);
        // Q'(s', a') = 0.2 + 0.3·1 − 0.7/√2 + 1.1/√2.
        let s2 = 0.5f64.sqrt();
        let q_next = 0.2 + 0.3 - 0.7 * s2 + 1.1 * s2;
        let y = -0.1 + 0.9 * q_next;
        let q = 0.2 + 0.3 * 0.4 - 0.7 * 0.6 + 1.1 * 0.8;
        let expected = (q - y) * (q - y);
        let (loss, _) = l.critic_loss_and_gradient(&[&t]).unwrap();
        assert!((loss - expected).abs() < 1e-10, "{loss} vs {expected}");
    }

    #[test]
    fn critic_fixed_point_has_zero_loss() {
        let mut l = hand_built(0.0);
        let t = Transition {
            obs: vec![0.4],
            action: [0.6, 0.8],
            reward: 0.0,
            next_obs: vec![1.0],
            terminal: false,
        };
        let q = l.critic.predict(&[0.4, 0.6, 0.8]).unwrap()[0];
        let t = Transition { reward: q, ..t };
        assert!(l.critic_update(&[&t]).unwrap().abs() < 1e-24);
    }

    #[test]
    fn constant_critic_gives_zero_actor_gradient() {
        let mut l = hand_built(0.9);
        l.critic.layers[0].weights = vec![0.3, 0.0, 0.0];
        let t = transition(vec![0.25], 0.0, 0.0, false);
        let (_, g) = l.actor_objective_and_gradient(&[&t]).unwrap();
        assert!(g.values().all(|&v| v == 0.0));
    }

    #[test]
    fn actor_step_does_not_decrease_q() {
        let mut l = hand_built(0.9);
        let t = transition(vec![0.25], 0.0, 0.0, false);
        let before = l.actor_update(&[&t]).unwrap();
        let (after, _) = l.actor_objective_and_gradient(&[&t]).unwrap();
        assert!(after >= before - 1e-12, "{after} < {before}");
        assert!(after > before);
    }

    #[test]
    fn empty_batches_are_rejected() {
        let mut l = hand_built(0.9);
        assert!(matches!(l.critic_update(&[]), Err(Error::EmptyInput(_))));
        assert!(matches!(l.actor_update(&[]), Err(Error::EmptyInput(_))));
        let bad = transition(vec![0.1, 0.2], 0.0, 0.0, false);
        assert!(l.critic_update(&[&bad]).is_err());
    }

    #[test]
    fn soft_update_moves_targets_toward_online() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut l = AgentLearner::new(3, tiny_config(), &mut rng).unwrap();
        l.actor.values_mut().for_each(|v| *v += 1.0);
        let mut gap = f64::INFINITY;
        for _ in 0..50 {
            let prev = l.actor_target.clone();
            l.soft_update_targets().unwrap();
            for ((t, p), o) in l.actor_target.values().zip(prev.values()).zip(l.actor.values()) {
                assert!((t - p) * (o - p) >= 0.0 && (t - o).abs() <= (p - o).abs());
            }
            let g: f64 = l
                .actor_target
                .values()
                .zip(l.actor.values())
                .map(|(t, o)| (t - o).abs())
                .fold(0.0, f64::max);
            assert!(g < gap);
            gap = g;
        }
        l.config.tau = 1.0;
        l.soft_update_targets().unwrap();
        assert_eq!(l.actor_target, l.actor);
        assert_eq!(l.critic_target, l.critic);
    }

    #[test]
    fn learners_are_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut a = AgentLearner::new(2, tiny_config(), &mut rng).unwrap();
        let b = AgentLearner::new(2, tiny_config(), &mut rng).unwrap();
        let b_before = b.clone();
        for i in 0..8 {
            a.remember(transition(vec![0.1 * i as f64, 0.2], 0.3, -0.1, false)).unwrap();
        }
        a.train_step(&mut rng).unwrap().expect("buffer ready");
        assert_eq!(b, b_before);
        assert!(b.buffer.is_empty());
    }

    #[test]
    fn train_step_waits_for_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut a = AgentLearner::new(2, tiny_config(), &mut rng).unwrap();
        for _ in 0..3 {
            a.remember(transition(vec![0.1, 0.2], 0.3, -0.1, false)).unwrap();
        }
        assert!(a.train_step(&mut rng).unwrap().is_none());
        a.remember(transition(vec![0.1, 0.2], 0.3, -0.1, false)).unwrap();
        let stats = a.train_step(&mut rng).unwrap().unwrap();
        assert!(stats.critic_loss.is_finite() && stats.actor_q.is_finite());
        assert_eq!(a.buffer.len(), 4);
        assert_eq!(a.actor_opt.steps, 1);
        assert_eq!(a.critic_opt.steps, 1);
    }
}
