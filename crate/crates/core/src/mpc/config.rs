use serde::{Deserialize, Serialize};
use step_qp::AdmmSettings;

use super::geometry::Footprint;
use super::library::LibraryConfig;
use super::model::{DynamicsModel, Limits};

/// How the speed bound depends on the CVaR ρ of the cell under the robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityRiskMode {
    /// `|v| ≤ min(γ/ρ, v_max)`: slower in riskier cells.
    Inverse,
    /// `|v| ≤ γ·ρ`.
    Proportional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinesearchConfig {
    pub gamma_init: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub max_iterations: usize,
}

impl Default for LinesearchConfig {
    fn default() -> Self {
        Self {
            gamma_init: 1.0,
            gamma_min: 0.0625,
            gamma_max: 1.0,
            max_iterations: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QpConfig {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    pub adaptive_rho: bool,
}

impl Default for QpConfig {
    fn default() -> Self {
        Self {
            eps_abs: 1e-4,
            eps_rel: 1e-4,
            max_iter: 4000,
            adaptive_rho: true,
        }
    }
}

impl QpConfig {
    pub fn settings(&self) -> AdmmSettings {
        AdmmSettings::default()
            .with_tolerances(self.eps_abs, self.eps_rel)
            .with_max_iter(self.max_iter)
            .with_adaptive_rho(self.adaptive_rho)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcConfig {
    pub model: DynamicsModel,
    pub limits: Limits,
    pub dt: f64,
    pub horizon: usize,
    pub qp_iterations: usize,
    /// Diagonal tracking weights on `[px, py, θ, vx, vy, vθ]`; the
    /// differential-drive model uses the first four.
    pub tracking_weights: [f64; 6],
    pub control_weight: f64,
    /// Extra quadratic weight on control changes inside the QP.
    pub control_change_weight: f64,
    pub risk_weight: f64,
    pub slack_weight: f64,
    pub use_slacks: bool,
    /// Box on state deviations `[px, py, θ, vx, vy, vθ]`.
    pub state_box: [f64; 6],
    /// Box on control deviations.
    pub control_box: [f64; 3],
    pub velocity_risk: VelocityRiskMode,
    pub gamma_v: f64,
    pub gamma_theta: f64,
    /// Pitch and roll limits (rad).
    pub omega_max: [f64; 2],
    pub footprint: Footprint,
    /// Required clearance in the linearized signed-distance rows.
    pub sd_margin: f64,
    /// Obstacles closer than this to a candidate footprint get a row.
    pub sd_activation: f64,
    /// Half-width of the square window (m) around the robot in which
    /// obstacles are decomposed.
    pub obstacle_window: f64,
    pub v_ref: f64,
    pub library: LibraryConfig,
    pub linesearch: LinesearchConfig,
    pub qp: QpConfig,
    pub seed: u64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            model: DynamicsModel::default(),
            limits: Limits::default(),
            dt: 0.1,
            horizon: 20,
            qp_iterations: 3,
            tracking_weights: [1.0, 1.0, 0.1, 0.1, 0.1, 0.1],
            control_weight: 1e-3,
            control_change_weight: 1e-2,
            risk_weight: 1.0,
            slack_weight: 1e3,
            use_slacks: true,
            state_box: [0.5, 0.5, 0.5, 0.5, 0.5, 0.5],
            control_box: [1.0, 1.0, 1.0],
            velocity_risk: VelocityRiskMode::Inverse,
            gamma_v: 0.2,
            gamma_theta: 0.2,
            omega_max: [0.35, 0.35],
            footprint: Footprint::default(),
            sd_margin: 0.05,
            sd_activation: 1.0,
            obstacle_window: 4.0,
            v_ref: 0.8,
            library: LibraryConfig::default(),
            linesearch: LinesearchConfig::default(),
            qp: QpConfig::default(),
            seed: 0,
        }
    }
}
