use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gait {
    Walk,
    Stair,
    Crawl,
    Crouch,
}

impl Gait {
    pub fn name(self) -> &'static str {
        match self {
            Gait::Walk => "walk",
            Gait::Stair => "stair",
            Gait::Crawl => "crawl",
            Gait::Crouch => "crouch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaitConfig {
    /// Nominal standing height (m).
    pub robot_height: f64,
    /// Height reduction available by crouching (m).
    pub crouch_depth: f64,
    pub slip_threshold: f64,
}

impl Default for GaitConfig {
    fn default() -> Self {
        Self {
            robot_height: 0.6,
            crouch_depth: 0.16,
            slip_threshold: 0.5,
        }
    }
}

/// Gait from terrain evidence. Priority: stair, crawl, crouch, walk.
/// `clearance_deficit` is robot height minus the free height under the
/// ceiling; crouch applies when `0 < deficit ≤ crouch_depth`. A larger deficit
/// is impassable in any gait and is left to the risk map.
pub fn gait_select(clearance_deficit: Option<f64>, p_slip: f64, stair: bool, cfg: &GaitConfig) -> Gait {
    if stair {
        Gait::Stair
    } else if p_slip > cfg.slip_threshold {
        Gait::Crawl
    } else if clearance_deficit.is_some_and(|d| d > 0.0 && d <= cfg.crouch_depth) {
        Gait::Crouch
    } else {
        Gait::Walk
    }
}

/// Clearance deficit for a measured ceiling height above the ground.
pub fn clearance_deficit(ceiling_height: Option<f64>, cfg: &GaitConfig) -> Option<f64> {
    ceiling_height.map(|h| cfg.robot_height - h)
}
