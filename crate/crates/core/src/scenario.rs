//! The two lane-drop scenarios.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::sim::{CorridorSpec, Demand, Segment};
use crate::{Error, Result};

/// Default speed limit in m/s.
pub const DEFAULT_SPEED_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioName {
    Moderate,
    Severe,
}

impl ScenarioName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Moderate => "moderate",
            Self::Severe => "severe",
        }
    }

    pub fn spec(self) -> ScenarioSpec {
        match self {
            Self::Moderate => moderate_scenario(),
            Self::Severe => severe_scenario(),
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moderate" => Ok(Self::Moderate),
            "severe" => Ok(Self::Severe),
            other => Err(Error::Config(format!(
                "scenario must be \"moderate\" or \"severe\", got {other:?}"
            ))),
        }
    }
}

/// When an episode ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Horizon {
    /// Exactly this many RL steps.
    Fixed { steps: usize },
    /// Until every vehicle has spawned and exited, or `cap` steps.
    UntilEmpty { cap: usize },
}

impl Horizon {
    pub fn max_steps(self) -> usize {
        match self {
            Self::Fixed { steps } => steps,
            Self::UntilEmpty { cap } => cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    pub corridor: CorridorSpec,
    pub inflow_rate: f64,
    pub total_vehicles: usize,
    pub cav_count: usize,
    pub horizon: Horizon,
}

impl ScenarioSpec {
    pub fn demand(&self) -> Demand {
        Demand {
            inflow_rate: self.inflow_rate,
            total_vehicles: self.total_vehicles,
            cav_count: self.cav_count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.corridor.validate()?;
        if !(self.inflow_rate.is_finite() && self.inflow_rate > 0.0) {
            return Err(Error::Config(format!(
                "scenario.inflow_rate must be positive, got {}",
                self.inflow_rate
            )));
        }
        if self.cav_count > self.total_vehicles {
            return Err(Error::Config(format!(
                "scenario.cav_count ({}) exceeds total_vehicles ({})",
                self.cav_count, self.total_vehicles
            )));
        }
        if self.horizon.max_steps() == 0 {
            return Err(Error::Config("scenario.horizon must allow at least one step".into()));
        }
        Ok(())
    }
}

fn corridor(total_length: f64, segments: &[(f64, usize)]) -> CorridorSpec {
    CorridorSpec {
        total_length,
        segments: segments
            .iter()
            .map(|&(start, lanes)| Segment { start, lanes })
            .collect(),
        speed_limit: DEFAULT_SPEED_LIMIT,
    }
}

/// 500 m, 4 lanes dropping to 3 at 300 m and to 2 at 400 m; 1500 veh/h,
/// 50 vehicles of which 5 CAVs; runs until empty with a 2000-step cap.
pub fn moderate_scenario() -> ScenarioSpec {
    ScenarioSpec {
        name: ScenarioName::Moderate,
        corridor: corridor(500.0, &[(0.0, 4), (300.0, 3), (400.0, 2)]),
        inflow_rate: 1500.0,
        total_vehicles: 50,
        cav_count: 5,
        horizon: Horizon::UntilEmpty { cap: 2000 },
    }
}

/// 1 km, 4 lanes dropping to 2 at 600 m and to 1 at 800 m; 2300 veh/h,
/// 140 vehicles of which 10 CAVs; 1500 steps.
pub fn severe_scenario() -> ScenarioSpec {
    ScenarioSpec {
        name: ScenarioName::Severe,
        corridor: corridor(1000.0, &[(0.0, 4), (600.0, 2), (800.0, 1)]),
        inflow_rate: 2300.0,
        total_vehicles: 140,
        cav_count: 10,
        horizon: Horizon::Fixed { steps: 1500 },
    }
}
