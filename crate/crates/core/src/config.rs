//! Run configuration: one JSON document with a section per module.

use serde::{Deserialize, Serialize};

use crate::agent::TrainConfig;
use crate::env::{EnvSettings, ObsParams, RewardConfig};
use crate::scenario::{ScenarioName, ScenarioSpec};
use crate::sim::{IdmParams, LaneChangeParams, SimParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
    Baseline,
    Compare,
    Render,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioName,
    pub mode: Mode,
    pub seed: u64,
    /// Episodes for eval and baseline runs.
    pub episodes: usize,
    pub output_dir: String,
    pub checkpoint: Option<String>,
    pub idm: IdmParams,
    pub lane_change: LaneChangeParams,
    pub sim: SimParams,
    pub obs: ObsParams,
    pub reward: RewardConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioName::Moderate,
            mode: Mode::Baseline,
            seed: 0,
            episodes: 10,
            output_dir: "out".into(),
            checkpoint: None,
            idm: IdmParams::default(),
            lane_change: LaneChangeParams::default(),
            sim: SimParams::default(),
            obs: ObsParams::default(),
            reward: RewardConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses and validates.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.idm.validate("idm")?;
        self.lane_change.validate()?;
        self.sim.validate()?;
        self.reward.validate()?;
        if !(self.obs.rho.is_finite() && self.obs.rho > 0.0) {
            return Err(Error::Config(format!("obs.rho must be positive, got {}", self.obs.rho)));
        }
        if self.obs.max_sensed == 0 {
            return Err(Error::Config("obs.max_sensed must be at least 1".into()));
        }
        self.train.validate()?;
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be at least 1".into()));
        }
        if self.output_dir.is_empty() {
            return Err(Error::Config("output_dir must not be empty".into()));
        }
        Ok(())
    }

    pub fn env_settings(&self) -> EnvSettings {
        EnvSettings {
            idm: self.idm,
            lane_change: self.lane_change,
            sim: self.sim,
            obs: self.obs,
            reward: self.reward,
        }
    }

    pub fn scenario_spec(&self) -> ScenarioSpec {
        self.scenario.spec()
    }
}
