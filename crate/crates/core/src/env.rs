//! RL environment: one-second decision steps over the simulator, the
//! throughput/variance reward and episode termination.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::metrics::{accumulate_grids, count_cells_below, Controller, EpisodeMetrics, TrajectoryRow, CONGESTED_KMH};
use crate::obs::{observe, GraphObservation, ObsConfig};
use crate::scenario::{Horizon, ScenarioSpec};
use crate::sim::{CorridorSpec, IdmParams, LaneChangeParams, SimParams, SimState, Simulator, ACTION_BOUND};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Weight of the speed-variance penalty.
    pub beta: f64,
    /// Throughput window in seconds.
    pub window: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            beta: 10.0,
            window: 10.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Config(format!("reward.beta must be >= 0, got {}", self.beta)));
        }
        if !(self.window.is_finite() && self.window > 0.0) {
            return Err(Error::Config(format!("reward.window must be positive, got {}", self.window)));
        }
        Ok(())
    }
}

/// Sensing settings; the normalisers come from the corridor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObsParams {
    pub rho: f64,
    pub max_sensed: usize,
}

impl Default for ObsParams {
    fn default() -> Self {
        Self {
            rho: 100.0,
            max_sensed: 20,
        }
    }
}

/// Everything besides the scenario needed to build an environment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnvSettings {
    pub idm: IdmParams,
    pub lane_change: LaneChangeParams,
    pub sim: SimParams,
    pub obs: ObsParams,
    pub reward: RewardConfig,
}

/// Who drives the CAVs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CavControl {
    /// Actions passed to [`BottleneckEnv::step`] become CAV accelerations.
    Learned,
    /// CAVs follow the IDM like HDVs; actions are checked and ignored.
    RuleBased,
}

/// `3600 · |{e ∈ exit_log : now − T < e ≤ now}| / T`, in veh/h. `exit_log`
/// must be sorted.
pub fn throughput_reward(exit_log: &[f64], now: f64, cfg: &RewardConfig) -> f64 {
    let upto = exit_log.partition_point(|&e| e <= now);
    let before = exit_log.partition_point(|&e| e <= now - cfg.window);
    3600.0 * upto.saturating_sub(before) as f64 / cfg.window
}

/// Count and population variance of speeds of vehicles upstream of the first
/// lane drop.
pub fn upstream_speed_variance(state: &SimState, corridor: &CorridorSpec) -> (usize, f64) {
    let drop = corridor.first_drop().unwrap_or(corridor.total_length);
    let speeds: Vec<f64> = state
        .vehicles
        .iter()
        .filter(|v| v.position < drop)
        .map(|v| v.speed)
        .collect();
    if speeds.is_empty() {
        return (0, 0.0);
    }
    let n = speeds.len() as f64;
    let mean = speeds.iter().sum::<f64>() / n;
    let var = speeds.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    (speeds.len(), var)
}

/// `−β·σ²/n_μ` over vehicles upstream of the first drop; 0 when there are none.
pub fn variance_penalty(state: &SimState, corridor: &CorridorSpec, cfg: &RewardConfig) -> f64 {
    match upstream_speed_variance(state, corridor) {
        (0, _) => 0.0,
        (n, var) => -cfg.beta * var / n as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub r1: f64,
    pub r2: f64,
    pub exited_this_step: usize,
    /// Mean speed of all vehicles in the corridor, m/s (0 when empty).
    pub mean_speed: f64,
    pub n_upstream: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub obs: GraphObservation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
pub struct BottleneckEnv {
    scenario: ScenarioSpec,
    sim: Simulator,
    obs_cfg: ObsConfig,
    reward: RewardConfig,
    control: CavControl,
    state: SimState,
    steps: usize,
    done: bool,
    episode_reward: f64,
    recording: bool,
    trajectory: Vec<TrajectoryRow>,
}

impl BottleneckEnv {
    /// The environment starts finished; call [`BottleneckEnv::reset`] first.
    pub fn new(scenario: ScenarioSpec, settings: &EnvSettings, control: CavControl) -> Result<Self> {
        scenario.validate()?;
        settings.reward.validate()?;
        let sim = Simulator::new(
            scenario.corridor.clone(),
            scenario.demand(),
            settings.idm,
            settings.lane_change,
            settings.sim,
        )?;
        let obs_cfg = ObsConfig::for_corridor(&scenario.corridor, settings.obs.rho, settings.obs.max_sensed);
        obs_cfg.validate()?;
        let state = sim.initial_state(0);
        Ok(Self {
            scenario,
            sim,
            obs_cfg,
            reward: settings.reward,
            control,
            state,
            steps: 0,
            done: true,
            episode_reward: 0.0,
            recording: false,
            trajectory: Vec::new(),
        })
    }

    /// Enables the per-step trajectory log from the next reset on.
    pub fn set_recording(&mut self, on: bool) {
        self.recording = on;
    }

    pub fn scenario(&self) -> &ScenarioSpec {
        &self.scenario
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn obs_config(&self) -> &ObsConfig {
        &self.obs_cfg
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.reward
    }

    pub fn control(&self) -> CavControl {
        self.control
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn episode_reward(&self) -> f64 {
        self.episode_reward
    }

    pub fn trajectory(&self) -> &[TrajectoryRow] {
        &self.trajectory
    }

    /// Fresh episode, run forward until the first CAV is in the corridor.
    pub fn reset(&mut self, seed: u64) -> Result<GraphObservation> {
        self.state = self.sim.initial_state(seed);
        self.steps = 0;
        self.done = false;
        self.episode_reward = 0.0;
        self.trajectory.clear();
        if self.scenario.cav_count > 0 {
            let limit = 100 * self.sim.params.substeps_per_action() * self.scenario.horizon.max_steps();
            let none = BTreeMap::new();
            while self.state.cav_spawned == 0 {
                if self.state.substeps() as usize > limit {
                    return Err(Error::Invariant("no CAV could enter the corridor".into()));
                }
                self.sim.advance(&mut self.state, &none)?;
            }
        }
        observe(&self.state, &self.obs_cfg)
    }

    /// Holds one acceleration per current CAV (in `cav_ids` order) for one
    /// decision interval.
    pub fn step(&mut self, actions: &[f64]) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let ids = self.state.cav_ids();
        if actions.len() != ids.len() {
            return Err(Error::ActionLength {
                expected: ids.len(),
                got: actions.len(),
            });
        }
        for (&id, &a) in ids.iter().zip(actions) {
            if !(a.is_finite() && a.abs() <= ACTION_BOUND) {
                return Err(Error::ActionRange { vehicle: id, value: a });
            }
        }
        let mut commands: BTreeMap<u64, f64> = match self.control {
            CavControl::Learned => ids.iter().copied().zip(actions.iter().copied()).collect(),
            CavControl::RuleBased => BTreeMap::new(),
        };

        let mut exited = 0;
        for _ in 0..self.sim.params.substeps_per_action() {
            self.sim.spawn_inflow(&mut self.state);
            let state = &self.state;
            commands.retain(|id, _| state.vehicle(*id).is_some());
            exited += self.sim.step(&mut self.state, &commands, self.sim.params.dt)?;
        }
        self.steps += 1;

        let r1 = throughput_reward(&self.state.exit_log, self.state.time, &self.reward);
        let (n_upstream, _) = upstream_speed_variance(&self.state, &self.scenario.corridor);
        let r2 = variance_penalty(&self.state, &self.scenario.corridor, &self.reward);
        let reward = r1 + r2;
        self.episode_reward += reward;

        let n = self.state.vehicles.len();
        let mean_speed = if n == 0 {
            0.0
        } else {
            self.state.vehicles.iter().map(|v| v.speed).sum::<f64>() / n as f64
        };

        self.done = match self.scenario.horizon {
            Horizon::Fixed { steps } => self.steps >= steps,
            Horizon::UntilEmpty { cap } => {
                self.state.exited_count == self.scenario.total_vehicles || self.steps >= cap
            }
        };
        if self.recording {
            self.trajectory.extend(TrajectoryRow::snapshot(&self.state));
        }
        Ok(StepOutcome {
            obs: observe(&self.state, &self.obs_cfg)?,
            reward,
            done: self.done,
            info: StepInfo {
                r1,
                r2,
                exited_this_step: exited,
                mean_speed,
                n_upstream,
            },
        })
    }
}

/// Runs one full episode with `policy` choosing the actions and summarises it.
/// Recording is switched on for the episode.
pub fn run_episode<F>(
    env: &mut BottleneckEnv,
    seed: u64,
    episode: usize,
    controller: Controller,
    mut policy: F,
) -> Result<EpisodeMetrics>
where
    F: FnMut(&GraphObservation) -> Result<Vec<f64>>,
{
    env.set_recording(true);
    let mut obs = env.reset(seed)?;
    while !env.is_done() {
        let actions = policy(&obs)?;
        obs = env.step(&actions)?.obs;
    }
    let (mean_speed_grid, speed_std_grid) = accumulate_grids(env.trajectory(), env.scenario().corridor.total_length)?;
    Ok(EpisodeMetrics {
        scenario: env.scenario().name,
        controller,
        episode,
        seed,
        episode_reward: env.episode_reward(),
        throughput: env.state().exited_count,
        episode_length: env.steps(),
        cells_below_8kmh: count_cells_below(&mean_speed_grid, CONGESTED_KMH),
        mean_speed_grid,
        speed_std_grid,
    })
}

/// Rule-based episode: CAVs drive like HDVs.
pub fn baseline_episode(
    scenario: &ScenarioSpec,
    settings: &EnvSettings,
    seed: u64,
    episode: usize,
) -> Result<EpisodeMetrics> {
    let mut env = BottleneckEnv::new(scenario.clone(), settings, CavControl::RuleBased)?;
    run_episode(&mut env, seed, episode, Controller::Baseline, |obs| {
        Ok(vec![0.0; obs.node_count()])
    })
}
