use std::path::Path;

use serde::{Deserialize, Serialize};
use step_core::behaviors::BehaviorConfig;
use step_core::mpc::{DynamicsModel, MpcConfig};
use step_core::planner::AstarConfig;
use step_core::riskmap::RiskFactorConfig;

use crate::sensor::SensorConfig;
use crate::world::WorldSpec;
use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub max_cycles: usize,
    /// Sensor sweeps happen every this many control cycles.
    pub sense_every: usize,
    /// The geometric path is replanned at least this often.
    pub replan_every: usize,
    pub goal_tolerance: f64,
    /// The belief map covers the start-goal bounding box grown by this much (m).
    pub map_margin: f64,
    /// Risk level used to score executed paths, identical across compared runs.
    pub risk_eval_alpha: f64,
    /// Consecutive failed searches at the lowest α before giving up.
    pub unreachable_patience: usize,
    /// Speed of scripted escape maneuvers (m/s).
    pub maneuver_speed: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            max_cycles: 900,
            sense_every: 5,
            replan_every: 10,
            goal_tolerance: 0.1,
            map_margin: 5.0,
            risk_eval_alpha: 0.9,
            unreachable_patience: 30,
            maneuver_speed: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub world: WorldSpec,
    pub sensor: SensorConfig,
    pub episode: EpisodeConfig,
    pub risk: RiskFactorConfig,
    pub astar: AstarConfig,
    pub mpc: MpcConfig,
    pub behaviors: BehaviorConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            world: WorldSpec::default(),
            sensor: SensorConfig::default(),
            episode: EpisodeConfig::default(),
            risk: RiskFactorConfig::default(),
            astar: AstarConfig {
                clearance_radius: 0.6,
                clearance_cost: 0.3,
                ..AstarConfig::default()
            },
            mpc: MpcConfig {
                model: DynamicsModel::DiffDrive { kappa: 0.0 },
                horizon: 15,
                ..MpcConfig::default()
            },
            behaviors: BehaviorConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String, SimError> {
        toml::to_string_pretty(self).map_err(|e| SimError::Config(e.to_string()))
    }
}
