use super::ddpg::DdpgAgent;
use super::noise::OuNoise;
use super::replay::{ReplayBuffer, Transition};
use crate::env::BottleneckEnv;
use crate::Result;

/// One training-log row, written at the end of every episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    /// Environment steps taken so far, over all episodes.
    pub step: usize,
    pub episode_steps: usize,
    /// Sum of raw per-step rewards.
    pub reward: f64,
    /// Means over the episode's updates; `None` during warm-up.
    pub critic_loss: Option<f64>,
    pub actor_objective: Option<f64>,
}

impl EpisodeLog {
    pub const CSV_HEADER: &'static str = "step,episode,reward,critic_loss,actor_objective";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        format!(
            "{},{},{},{},{}",
            self.step,
            self.episode,
            self.reward,
            opt(self.critic_loss),
            opt(self.actor_objective)
        )
    }
}

/// Seed of the `episode`-th episode of a run started with `seed`.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    seed.wrapping_add(episode as u64)
}

/// Runs episodes until `total_steps` environment steps (or `max_episodes`)
/// are used up. The first `warmup_steps` steps act with exploration noise but
/// do not update; afterwards every stored transition is followed by one
/// update. `on_episode` sees every finished (or truncated) episode.
pub fn train<F>(env: &mut BottleneckEnv, agent: &mut DdpgAgent, seed: u64, mut on_episode: F) -> Result<Vec<EpisodeLog>>
where
    F: FnMut(&EpisodeLog, &DdpgAgent) -> Result<()>,
{
    let cfg = agent.cfg;
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity)?;
    let mut noise = OuNoise::new(cfg.noise_theta, cfg.noise_sigma, seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut logs = Vec::new();
    let mut step = 0;
    let mut episode = 0;
    env.set_recording(false);
    while step < cfg.total_steps && cfg.max_episodes.is_none_or(|m| episode < m) {
        let mut obs = env.reset(episode_seed(seed, episode))?;
        noise.reset();
        let mut reward = 0.0;
        let mut episode_steps = 0;
        let (mut loss_sum, mut objective_sum, mut updates) = (0.0, 0.0, 0usize);
        while !env.is_done() && step < cfg.total_steps {
            let actions = agent.select_action(&obs, Some(&mut noise))?;
            let out = env.step(&actions)?;
            step += 1;
            episode_steps += 1;
            reward += out.reward;
            if !obs.is_empty() {
                buffer.push(Transition {
                    obs,
                    actions,
                    reward: out.reward,
                    next_obs: out.obs.clone(),
                    done: out.done,
                })?;
                if step > cfg.warmup_steps && buffer.len() >= cfg.batch_size {
                    let stats = agent.update(&buffer)?;
                    loss_sum += stats.critic_loss;
                    objective_sum += stats.actor_objective;
                    updates += 1;
                }
            }
            obs = out.obs;
        }
        let mean = |s: f64| (updates > 0).then(|| s / updates as f64);
        let log = EpisodeLog {
            episode,
            step,
            episode_steps,
            reward,
            critic_loss: mean(loss_sum),
            actor_objective: mean(objective_sum),
        };
        on_episode(&log, agent)?;
        logs.push(log);
        episode += 1;
    }
    Ok(logs)
}
