use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::networks::{clip_action, ActorParams, CriticParams};
use super::noise::OuNoise;
use super::replay::{ReplayBuffer, Transition};
use crate::nn::{accumulate, adam_step, zero_like, AdamState, Matrix, Parameters};
use crate::obs::GraphObservation;
use crate::sim::ACTION_BOUND;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub discount: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub warmup_steps: usize,
    pub noise_theta: f64,
    pub noise_sigma: f64,
    pub buffer_capacity: usize,
    /// Environment steps over the whole run.
    pub total_steps: usize,
    /// Optional cap on episodes; training stops at whichever limit comes first.
    pub max_episodes: Option<usize>,
    /// Multiplies rewards inside the TD target only. Logged rewards are raw.
    pub reward_scale: f64,
    /// Episodes between periodic checkpoints.
    pub checkpoint_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            discount: 0.99,
            tau: 1e-3,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            batch_size: 64,
            warmup_steps: 1000,
            noise_theta: 0.15,
            noise_sigma: 0.6,
            buffer_capacity: 100_000,
            total_steps: 1_000_000,
            max_episodes: None,
            reward_scale: 1e-3,
            checkpoint_interval: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config(format!("train.{field} {msg}")));
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad("discount", format!("must be in (0, 1), got {}", self.discount));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau", format!("must be in (0, 1], got {}", self.tau));
        }
        for (field, v) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("noise_theta", self.noise_theta),
            ("reward_scale", self.reward_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(field, format!("must be a finite positive number, got {v}"));
            }
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad("noise_sigma", format!("must be >= 0, got {}", self.noise_sigma));
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1".into());
        }
        if self.buffer_capacity < self.batch_size {
            return bad(
                "buffer_capacity",
                format!("must be at least batch_size ({}), got {}", self.batch_size, self.buffer_capacity),
            );
        }
        if self.checkpoint_interval == 0 {
            return bad("checkpoint_interval", "must be at least 1".into());
        }
        Ok(())
    }
}

/// `y = r` for terminal transitions, otherwise `y = r + γ·Q′`.
pub fn td_target(reward: f64, discount: f64, done: bool, next_q: f64) -> f64 {
    if done {
        reward
    } else {
        reward + discount * next_q
    }
}

/// `θ′ ← τθ + (1 − τ)θ′` for every tensor.
pub fn soft_update<P: Parameters>(target: &mut P, online: &P, tau: f64) {
    let src: Vec<&Matrix> = online.tensors().into_iter().map(|(_, m)| m).collect();
    for (dst, s) in target.tensors_mut().into_iter().zip(src) {
        for (t, &o) in dst.data_mut().iter_mut().zip(s.data()) {
            *t = tau * o + (1.0 - tau) * *t;
        }
    }
}

/// Whether a gradient step on a clipped output can change the emitted action.
/// At a saturated bound only steps pointing back inside pass.
fn passes_clip(raw: f64, ascent: f64) -> bool {
    !((raw > ACTION_BOUND && ascent > 0.0) || (raw < -ACTION_BOUND && ascent < 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    /// Minibatch mean of `Q(s, μ(s))` before the actor step.
    pub actor_objective: f64,
}

/// Online and target networks with their optimisers.
#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub actor: ActorParams,
    pub critic: CriticParams,
    pub actor_target: ActorParams,
    pub critic_target: CriticParams,
    actor_opt: AdamState,
    critic_opt: AdamState,
    pub cfg: TrainConfig,
    rng: ChaCha8Rng,
}

impl DdpgAgent {
    pub fn new(cfg: TrainConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = ActorParams::init(&mut rng);
        let critic = CriticParams::init(&mut rng);
        Ok(Self::from_networks(cfg, actor.clone(), critic.clone(), actor, critic, rng))
    }

    pub fn from_networks(
        cfg: TrainConfig,
        actor: ActorParams,
        critic: CriticParams,
        actor_target: ActorParams,
        critic_target: CriticParams,
        rng: ChaCha8Rng,
    ) -> Self {
        Self {
            actor_opt: AdamState::new(&actor),
            critic_opt: AdamState::new(&critic),
            actor,
            critic,
            actor_target,
            critic_target,
            cfg,
            rng,
        }
    }

    /// `μ(s)` plus, when `noise` is given, one OU draw per node, clipped.
    pub fn select_action(&self, obs: &GraphObservation, noise: Option<&mut OuNoise>) -> Result<Vec<f64>> {
        select_action(&self.actor, obs, noise)
    }

    pub fn update(&mut self, buffer: &ReplayBuffer) -> Result<UpdateStats> {
        let indices = buffer.sample_indices(self.cfg.batch_size, &mut self.rng)?;
        let batch: Vec<&Transition> = indices.iter().filter_map(|&i| buffer.get(i)).collect();
        let targets = self.targets(&batch)?;
        let critic_loss = self.critic_step(&batch, &targets)?;
        let actor_objective = self.actor_step(&batch)?;
        soft_update(&mut self.actor_target, &self.actor, self.cfg.tau);
        soft_update(&mut self.critic_target, &self.critic, self.cfg.tau);
        if !(critic_loss.is_finite() && actor_objective.is_finite()) {
            return Err(Error::NonFinite("ddpg_update"));
        }
        Ok(UpdateStats {
            critic_loss,
            actor_objective,
        })
    }

    /// TD targets from the target networks. A next state without CAVs has no
    /// action to bootstrap from and counts as terminal.
    pub fn targets(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        batch
            .iter()
            .map(|t| {
                let r = self.cfg.reward_scale * t.reward;
                if t.done || t.next_obs.is_empty() {
                    return Ok(r);
                }
                let next_a = self.actor_target.forward(&t.next_obs)?;
                let next_q = self.critic_target.forward(&t.next_obs, &next_a)?;
                Ok(td_target(r, self.cfg.discount, false, next_q))
            })
            .collect()
    }

    /// Mean squared TD error and its gradient.
    pub fn critic_loss_and_grad(&self, batch: &[&Transition], targets: &[f64]) -> Result<(f64, CriticParams)> {
        let scale = 1.0 / batch.len() as f64;
        let mut grad = zero_like(&self.critic);
        let mut loss = 0.0;
        for (t, &y) in batch.iter().zip(targets) {
            let trace = self.critic.forward_trace(&t.obs, &t.actions)?;
            let diff = trace.q - y;
            loss += diff * diff * scale;
            let (g, _) = self.critic.backward(&trace, 2.0 * diff * scale)?;
            accumulate(&mut grad, 1.0, &g);
        }
        Ok((loss, grad))
    }

    /// One Adam step on the critic; returns the pre-step loss.
    pub fn critic_step(&mut self, batch: &[&Transition], targets: &[f64]) -> Result<f64> {
        let (loss, grad) = self.critic_loss_and_grad(batch, targets)?;
        adam_step(&mut self.critic, &grad, &mut self.critic_opt, self.cfg.critic_lr);
        Ok(loss)
    }

    /// Minibatch mean of `Q(s, μ(s))`.
    pub fn policy_value(&self, batch: &[&Transition]) -> Result<f64> {
        let mut total = 0.0;
        for t in batch {
            let a = self.actor.forward(&t.obs)?;
            total += self.critic.forward(&t.obs, &a)?;
        }
        Ok(total / batch.len() as f64)
    }

    /// One Adam step on the actor along `∇_a Q · ∇_θ μ`; returns the
    /// pre-step objective.
    pub fn actor_step(&mut self, batch: &[&Transition]) -> Result<f64> {
        let scale = 1.0 / batch.len() as f64;
        let mut grad = zero_like(&self.actor);
        let mut objective = 0.0;
        for t in batch {
            let trace = self.actor.forward_trace(&t.obs)?;
            let actions: Vec<f64> = trace.raw.iter().map(|&r| clip_action(r)).collect();
            let ctrace = self.critic.forward_trace(&t.obs, &actions)?;
            objective += ctrace.q * scale;
            let (_, dq_da) = self.critic.backward(&ctrace, 1.0)?;
            // Adam minimises, so feed the gradient of -Q.
            let d_raw: Vec<f64> = trace
                .raw
                .iter()
                .zip(&dq_da)
                .map(|(&raw, &g)| if passes_clip(raw, g) { -g * scale } else { 0.0 })
                .collect();
            let g = self.actor.backward(&trace, &d_raw)?;
            accumulate(&mut grad, 1.0, &g);
        }
        adam_step(&mut self.actor, &grad, &mut self.actor_opt, self.cfg.actor_lr);
        Ok(objective)
    }
}

pub fn select_action(actor: &ActorParams, obs: &GraphObservation, noise: Option<&mut OuNoise>) -> Result<Vec<f64>> {
    let mut actions = actor.forward(obs)?;
    if let Some(noise) = noise {
        for (a, n) in actions.iter_mut().zip(noise.sample(&obs.cav_ids)) {
            *a = clip_action(*a + n);
        }
    }
    Ok(actions)
}
