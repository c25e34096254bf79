use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::riskmap::Factor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FactorWeights {
    pub terrain: f64,
    pub step: f64,
    pub slope: f64,
    pub collision: f64,
    pub negative_obstacle: f64,
    pub semantic: f64,
}

impl Default for FactorWeights {
    fn default() -> Self {
        Self {
            terrain: 1.0,
            step: 1.0,
            slope: 1.0,
            collision: 1.0,
            negative_obstacle: 1.0,
            semantic: 1.0,
        }
    }
}

impl FactorWeights {
    pub fn get(&self, f: Factor) -> f64 {
        match f {
            Factor::Terrain => self.terrain,
            Factor::Step => self.step,
            Factor::Slope => self.slope,
            Factor::Collision => self.collision,
            Factor::NegativeObstacle => self.negative_obstacle,
            Factor::Semantic => self.semantic,
        }
    }
}

/// Risk-model parameters. Lengths in meters, angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskFactorConfig {
    pub weights: FactorWeights,
    /// Risk mean assigned to a lethal factor cell.
    pub lethal_mean: f64,
    /// Step height threshold at zero range.
    pub step_threshold: f64,
    /// Growth of the step and slope thresholds per meter of range.
    pub threshold_slope_per_m: f64,
    pub slope_threshold: f64,
    /// Obstacle points between these heights above ground count as collisions.
    pub collision_band: [f64; 2],
    pub inscribed_radius: f64,
    pub inflation_radius: f64,
    pub d_cover: f64,
    pub intensity_cutoff: f64,
    pub mud_mean: f64,
    pub covered_gap_sigma: f64,
    pub uncovered_gap_mean: f64,
    pub uncovered_gap_sigma: f64,
    /// Standard deviation added per meter of observation range.
    pub range_sigma_per_m: f64,
    /// Mean and deviation used for a cell with no information at all.
    pub prior_mean: f64,
    pub max_sigma: f64,
    /// Cells with CVaR above this are lethal.
    pub lethal_threshold: f64,
    pub safe_threshold: f64,
    /// Measurement variance doubles after this many seconds of age.
    pub age_tau: f64,
    pub normal_radius: f64,
}

impl Default for RiskFactorConfig {
    fn default() -> Self {
        Self {
            weights: FactorWeights::default(),
            lethal_mean: 1.0,
            step_threshold: 0.10,
            threshold_slope_per_m: 0.06f64.to_radians().tan(),
            slope_threshold: 0.45,
            collision_band: [0.15, 0.8],
            inscribed_radius: 0.2,
            inflation_radius: 0.4,
            d_cover: 0.5,
            intensity_cutoff: 0.3,
            mud_mean: 0.3,
            covered_gap_sigma: 0.05,
            uncovered_gap_mean: 0.1,
            uncovered_gap_sigma: 0.2,
            range_sigma_per_m: 0.002,
            prior_mean: 0.2,
            max_sigma: 0.2,
            lethal_threshold: 0.5,
            safe_threshold: 0.05,
            age_tau: 5.0,
            normal_radius: 0.35,
        }
    }
}

impl RiskFactorConfig {
    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        let all = [w.terrain, w.step, w.slope, w.collision, w.negative_obstacle, w.semantic];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || all.iter().sum::<f64>() <= 0.0 {
            return Err(CoreError::Domain("factor weights must be finite, non-negative and not all zero".into()));
        }
        let positive = [
            ("step_threshold", self.step_threshold),
            ("slope_threshold", self.slope_threshold),
            ("d_cover", self.d_cover),
            ("intensity_cutoff", self.intensity_cutoff),
            ("lethal_threshold", self.lethal_threshold),
            ("age_tau", self.age_tau),
            ("normal_radius", self.normal_radius),
            ("lethal_mean", self.lethal_mean),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CoreError::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        let nonneg = [
            ("threshold_slope_per_m", self.threshold_slope_per_m),
            ("range_sigma_per_m", self.range_sigma_per_m),
            ("max_sigma", self.max_sigma),
            ("prior_mean", self.prior_mean),
            ("mud_mean", self.mud_mean),
            ("uncovered_gap_mean", self.uncovered_gap_mean),
            ("uncovered_gap_sigma", self.uncovered_gap_sigma),
            ("covered_gap_sigma", self.covered_gap_sigma),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CoreError::Domain(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.collision_band[0] < self.collision_band[1]) || !(self.inscribed_radius <= self.inflation_radius) {
            return Err(CoreError::Domain("collision band or radii out of order".into()));
        }
        Ok(())
    }

    /// Detection threshold at the given observation range.
    pub fn step_threshold_at(&self, range: f64) -> f64 {
        self.step_threshold + self.threshold_slope_per_m * range
    }

    pub fn slope_threshold_at(&self, range: f64) -> f64 {
        self.slope_threshold + self.threshold_slope_per_m * range
    }

    pub fn range_var(&self, range: f64) -> f64 {
        (self.range_sigma_per_m * range).powi(2)
    }
}
