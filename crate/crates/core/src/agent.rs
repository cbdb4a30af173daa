//! Zero-step continuous advantage actor-critic over PID gains.
//!
//! The actor maps an apple coordinate to a Gaussian per gain: the first
//! half of its outputs are means, the second half raw standard deviations
//! passed through `softplus` plus a small floor. Samples are squashed by a
//! logistic and scaled into the gain box. Every episode is a single step,
//! so the TD error has no bootstrap term: `δ = r - V(s)`.
//!
//! Log-probabilities are taken on the raw Gaussian sample, without a
//! change-of-variables term for the squashing.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{GainBounds, PidGains};
use crate::neuralnet::{
    agent_layers, clip_gradients, gaussian_log_prob, load_checkpoint, logistic, save_checkpoint,
    softplus, AdamState, Mlp, NeuralNetError,
};

/// Lower bound added to every policy standard deviation.
pub const SIGMA_FLOOR: f64 = 1e-4;
/// Gains per joint: kp, ki, kd.
pub const GAINS_PER_JOINT: usize = 3;

/// RNG stream used to initialize the actor.
pub const ACTOR_INIT_STREAM: u64 = 1;
/// RNG stream used to initialize the critic.
pub const CRITIC_INIT_STREAM: u64 = 2;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid agent configuration: {0}")]
    InvalidConfig(String),
    #[error("actor output dimension {0} is not 6 or 12")]
    OutputDim(usize),
    #[error(transparent)]
    Network(#[from] NeuralNetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Kept for multi-step extensions; the zero-step TD error ignores it.
    #[serde(default = "default_discount")]
    pub discount: f64,
    #[serde(default)]
    pub gain_bounds: GainBounds,
    #[serde(default = "default_clip_norm")]
    pub clip_norm: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_discount() -> f64 {
    0.99
}

fn default_clip_norm() -> f64 {
    1.0
}

impl AgentConfig {
    /// Learning rates used when tuning a single joint.
    pub fn single_actuator(seed: u64) -> Self {
        Self {
            actor_lr: 5e-4,
            critic_lr: 1e-4,
            discount: default_discount(),
            gain_bounds: GainBounds::default(),
            clip_norm: default_clip_norm(),
            seed,
        }
    }

    /// Learning rates used when tuning both joints.
    pub fn two_actuator(seed: u64) -> Self {
        Self {
            actor_lr: 5e-5,
            critic_lr: 1e-5,
            ..Self::single_actuator(seed)
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::InvalidConfig(m.to_string()));
        if !(self.actor_lr > 0.0) {
            return bad("actor_lr must be positive");
        }
        if !(self.critic_lr > 0.0) {
            return bad("critic_lr must be positive");
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return bad("discount must lie in [0, 1]");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive");
        }
        let b = &self.gain_bounds;
        if !(b.kp_max > 0.0 && b.ki_max > 0.0 && b.kd_max > 0.0)
            || !(b.kp_max.is_finite() && b.ki_max.is_finite() && b.kd_max.is_finite())
        {
            return bad("gain bounds must be positive and finite");
        }
        Ok(())
    }
}

/// Squashes raw samples into gains: `bound · logistic(raw)` per gain, in
/// `(kp, ki, kd)` order, one triple per joint.
pub fn scale_action(raw: &[f64], bounds: &GainBounds) -> Vec<PidGains> {
    debug_assert_eq!(raw.len() % GAINS_PER_JOINT, 0);
    let scale = bounds.as_array();
    raw.chunks(GAINS_PER_JOINT)
        .map(|c| {
            PidGains::raw(
                scale[0] * logistic(c[0]),
                scale[1] * logistic(c[1]),
                scale[2] * logistic(c[2]),
            )
        })
        .collect()
}

pub fn td_error(reward: f64, value: f64) -> f64 {
    reward - value
}

/// Per-gain Gaussian parameters read off an actor output.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyHead {
    pub mean: Vec<f64>,
    pub sigma_raw: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl PolicyHead {
    pub fn from_output(output: &[f64]) -> Self {
        let n = output.len() / 2;
        let mean = output[..n].to_vec();
        let sigma_raw = output[n..].to_vec();
        let sigma = sigma_raw.iter().map(|&r| softplus(r) + SIGMA_FLOOR).collect();
        Self {
            mean,
            sigma_raw,
            sigma,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Total log density of `raw` and its gradient with respect to the
    /// actor outputs.
    pub fn log_prob(&self, raw: &[f64]) -> (f64, Vec<f64>) {
        let n = self.dim();
        let mut total = 0.0;
        let mut grad = vec![0.0; 2 * n];
        for i in 0..n {
            let g = gaussian_log_prob(raw[i], self.mean[i], self.sigma[i])
                .expect("softplus plus floor is positive");
            total += g.log_prob;
            grad[i] = g.d_mean;
            grad[n + i] = g.d_sigma * logistic(self.sigma_raw[i]);
        }
        (total, grad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSample {
    /// Pre-squash Gaussian samples, one per gain.
    pub raw: Vec<f64>,
    /// One triple per tuned joint.
    pub gains: Vec<PidGains>,
    pub log_prob: f64,
}

/// Draws one action from the actor's Gaussian policy at `state`.
pub fn sample_action<R: Rng + ?Sized>(
    actor: &Mlp,
    state: &[f64; 3],
    bounds: &GainBounds,
    rng: &mut R,
) -> ActionSample {
    let head = PolicyHead::from_output(actor.forward(state).output());
    let raw: Vec<f64> = head
        .mean
        .iter()
        .zip(&head.sigma)
        .map(|(&m, &s)| {
            let z: f64 = rng.sample(StandardNormal);
            m + s * z
        })
        .collect();
    let (log_prob, _) = head.log_prob(&raw);
    ActionSample {
        gains: scale_action(&raw, bounds),
        raw,
        log_prob,
    }
}

/// Loss `(r - V(s))²` and its gradient with respect to the critic.
pub fn critic_loss_gradient(critic: &Mlp, state: &[f64; 3], reward: f64) -> (f64, Vec<f64>) {
    let pass = critic.forward(state);
    let delta = td_error(reward, pass.output()[0]);
    let grad = critic.backward(&pass, &[-2.0 * delta]);
    (delta * delta, grad)
}

/// Loss `-log π(raw|s) · δ` (δ held constant) and its gradient.
pub fn actor_loss_gradient(actor: &Mlp, state: &[f64; 3], raw: &[f64], delta: f64) -> (f64, Vec<f64>) {
    let pass = actor.forward(state);
    let head = PolicyHead::from_output(pass.output());
    let (log_prob, dlogp) = head.log_prob(raw);
    let upstream: Vec<f64> = dlogp.iter().map(|g| -g * delta).collect();
    (-log_prob * delta, actor.backward(&pass, &upstream))
}

/// One `(state, raw action, reward)` entry of a sampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: [f64; 3],
    pub raw: Vec<f64>,
    pub reward: f64,
}

/// Monte Carlo policy-gradient loss `-(Σ log π)(Σ r)` and its gradient.
pub fn reinforce_loss_gradient(actor: &Mlp, trajectory: &[Transition]) -> (f64, Vec<f64>) {
    let total_reward: f64 = trajectory.iter().map(|t| t.reward).sum();
    let mut grad = vec![0.0; actor.params().len()];
    let mut sum_log_prob = 0.0;
    for step in trajectory {
        let pass = actor.forward(&step.state);
        let head = PolicyHead::from_output(pass.output());
        let (log_prob, dlogp) = head.log_prob(&step.raw);
        sum_log_prob += log_prob;
        let upstream: Vec<f64> = dlogp.iter().map(|g| -g * total_reward).collect();
        for (acc, g) in grad.iter_mut().zip(actor.backward(&pass, &upstream)) {
            *acc += g;
        }
    }
    (-sum_log_prob * total_reward, grad)
}

/// Single clipped Adam step of REINFORCE on one trajectory.
pub fn reinforce_update(actor: &mut Mlp, optimizer: &mut AdamState, trajectory: &[Transition], clip_norm: f64) {
    assert!(!trajectory.is_empty(), "trajectory must be nonempty");
    if trajectory.iter().map(|t| t.reward).sum::<f64>() == 0.0 {
        return;
    }
    let (_, mut grad) = reinforce_loss_gradient(actor, trajectory);
    clip_gradients(&mut grad, clip_norm);
    optimizer.step(actor.params_mut(), &grad);
}

/// Outcome of one learning update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnOutcome {
    pub td_error: f64,
    pub value: f64,
}

fn init_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_joints(n_joints: usize) -> Result<usize, AgentError> {
    match n_joints {
        1 | 2 => Ok(2 * GAINS_PER_JOINT * n_joints),
        n => Err(AgentError::OutputDim(2 * GAINS_PER_JOINT * n)),
    }
}

/// Common interface of the tuning agents driven by the harness.
pub trait GainTuner {
    fn config(&self) -> &AgentConfig;
    fn actor(&self) -> &Mlp;
    fn n_joints(&self) -> usize;
    fn sample_action(&self, state: &[f64; 3], rng: &mut ChaCha8Rng) -> ActionSample;
    fn learn(&mut self, state: &[f64; 3], action: &ActionSample, reward: f64) -> LearnOutcome;
    fn save(&self, dir: &Path) -> Result<(), AgentError>;

    /// Gains from the policy mean, without exploration noise.
    fn greedy_action(&self, state: &[f64; 3]) -> Vec<PidGains> {
        let head = PolicyHead::from_output(self.actor().forward(state).output());
        scale_action(&head.mean, &self.config().gain_bounds)
    }
}

#[derive(Debug, Clone)]
pub struct A2cAgent {
    config: AgentConfig,
    n_joints: usize,
    actor: Mlp,
    critic: Mlp,
    actor_opt: AdamState,
    critic_opt: AdamState,
}

impl A2cAgent {
    pub fn new(config: AgentConfig, n_joints: usize) -> Result<Self, AgentError> {
        config.validate()?;
        let out_dim = check_joints(n_joints)?;
        let actor = Mlp::new(&agent_layers(out_dim), &mut init_rng(config.seed, ACTOR_INIT_STREAM))?;
        let critic = Mlp::new(&agent_layers(1), &mut init_rng(config.seed, CRITIC_INIT_STREAM))?;
        Ok(Self::from_networks(config, actor, critic)?)
    }

    pub fn from_networks(config: AgentConfig, actor: Mlp, critic: Mlp) -> Result<Self, AgentError> {
        config.validate()?;
        let out_dim = actor.output_dim();
        if out_dim != 6 && out_dim != 12 {
            return Err(AgentError::OutputDim(out_dim));
        }
        if critic.output_dim() != 1 {
            return Err(AgentError::InvalidConfig("critic must have one output".into()));
        }
        Ok(Self {
            actor_opt: AdamState::new(actor.params().len(), config.actor_lr),
            critic_opt: AdamState::new(critic.params().len(), config.critic_lr),
            n_joints: out_dim / (2 * GAINS_PER_JOINT),
            config,
            actor,
            critic,
        })
    }

    /// Loads `actor` and `critic` checkpoints written by [`GainTuner::save`].
    pub fn load(config: AgentConfig, dir: &Path) -> Result<Self, AgentError> {
        let (actor, _) = load_checkpoint(&dir.join("actor"))?;
        let (critic, _) = load_checkpoint(&dir.join("critic"))?;
        Self::from_networks(config, actor, critic)
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn value(&self, state: &[f64; 3]) -> f64 {
        self.critic.forward(state).output()[0]
    }

    /// Adam step on `δ²`, whose gradient is `-2δ ∇V(s)`.
    pub fn update_critic(&mut self, state: &[f64; 3], delta: f64) {
        if delta == 0.0 {
            return;
        }
        let pass = self.critic.forward(state);
        let mut grad = self.critic.backward(&pass, &[-2.0 * delta]);
        clip_gradients(&mut grad, self.config.clip_norm);
        self.critic_opt.step(self.critic.params_mut(), &grad);
    }

    /// Adam step on `-log π(raw|s) · δ` with δ treated as a constant.
    pub fn update_actor(&mut self, state: &[f64; 3], action: &ActionSample, delta: f64) {
        if delta == 0.0 {
            return;
        }
        let (_, mut grad) = actor_loss_gradient(&self.actor, state, &action.raw, delta);
        clip_gradients(&mut grad, self.config.clip_norm);
        self.actor_opt.step(self.actor.params_mut(), &grad);
    }
}

impl GainTuner for A2cAgent {
    fn config(&self) -> &AgentConfig {
        &self.config
    }

    fn actor(&self) -> &Mlp {
        &self.actor
    }

    fn n_joints(&self) -> usize {
        self.n_joints
    }

    fn sample_action(&self, state: &[f64; 3], rng: &mut ChaCha8Rng) -> ActionSample {
        sample_action(&self.actor, state, &self.config.gain_bounds, rng)
    }

    fn learn(&mut self, state: &[f64; 3], action: &ActionSample, reward: f64) -> LearnOutcome {
        let value = self.value(state);
        let delta = td_error(reward, value);
        self.update_critic(state, delta);
        self.update_actor(state, action, delta);
        LearnOutcome {
            td_error: delta,
            value,
        }
    }

    fn save(&self, dir: &Path) -> Result<(), AgentError> {
        save_checkpoint(&dir.join("actor"), &self.actor, self.config.seed)?;
        save_checkpoint(&dir.join("critic"), &self.critic, self.config.seed)?;
        Ok(())
    }
}

/// Actor-only Monte Carlo policy gradient; each episode is a one-step
/// trajectory.
#[derive(Debug, Clone)]
pub struct ReinforceAgent {
    config: AgentConfig,
    n_joints: usize,
    actor: Mlp,
    actor_opt: AdamState,
}

impl ReinforceAgent {
    pub fn new(config: AgentConfig, n_joints: usize) -> Result<Self, AgentError> {
        config.validate()?;
        let out_dim = check_joints(n_joints)?;
        let actor = Mlp::new(&agent_layers(out_dim), &mut init_rng(config.seed, ACTOR_INIT_STREAM))?;
        Ok(Self {
            actor_opt: AdamState::new(actor.params().len(), config.actor_lr),
            config,
            n_joints,
            actor,
        })
    }
}

impl GainTuner for ReinforceAgent {
    fn config(&self) -> &AgentConfig {
        &self.config
    }

    fn actor(&self) -> &Mlp {
        &self.actor
    }

    fn n_joints(&self) -> usize {
        self.n_joints
    }

    fn sample_action(&self, state: &[f64; 3], rng: &mut ChaCha8Rng) -> ActionSample {
        sample_action(&self.actor, state, &self.config.gain_bounds, rng)
    }

    fn learn(&mut self, state: &[f64; 3], action: &ActionSample, reward: f64) -> LearnOutcome {
        let trajectory = [Transition {
            state: *state,
            raw: action.raw.clone(),
            reward,
        }];
        reinforce_update(&mut self.actor, &mut self.actor_opt, &trajectory, self.config.clip_norm);
        LearnOutcome {
            td_error: reward,
            value: 0.0,
        }
    }

    fn save(&self, dir: &Path) -> Result<(), AgentError> {
        save_checkpoint(&dir.join("actor"), &self.actor, self.config.seed)?;
        Ok(())
    }
}
