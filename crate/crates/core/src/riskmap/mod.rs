//! Multi-layer risk map: elevation filtering, per-factor Gaussian risk layers,
//! coverage accounting and CVaR aggregation.

mod aggregate;
mod config;
mod confidence;
mod coverage;
mod elevation;
mod geometric;
mod normals;
mod terrain;

pub use aggregate::{aggregate_cvar, CvarMap};
pub use config::{FactorWeights, RiskFactorConfig};
pub use confidence::{
    classify_gaps, gap_mask, negative_obstacle_risk, record_returns, semantic_water_risk, GapClass,
};
pub use coverage::coverage_update;
pub use elevation::{elevation_update, ElevationPoint, ElevationStats};
pub use geometric::{geometric_risk_layers, GeometricLayers, ObstaclePoint};
pub use normals::{surface_normals, NormalField, NormalSample};
pub use terrain::{terrain_risk, terrain_update, TerrainSample};

use serde::{Deserialize, Serialize};

use crate::grid::GridGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Terrain,
    Step,
    Slope,
    Collision,
    NegativeObstacle,
    Semantic,
}

impl Factor {
    pub const ALL: [Factor; 6] = [
        Factor::Terrain,
        Factor::Step,
        Factor::Slope,
        Factor::Collision,
        Factor::NegativeObstacle,
        Factor::Semantic,
    ];
}

/// Mean and standard deviation of a normally distributed traversability cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellRisk {
    pub mu: f64,
    pub sigma: f64,
}

/// One Gaussian risk factor over the grid. Unknown cells have `NaN` mean and variance.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskLayer {
    pub geometry: GridGeometry,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub lethal: Vec<bool>,
}

impl RiskLayer {
    pub fn unknown(geometry: GridGeometry) -> Self {
        let n = geometry.len();
        Self {
            geometry,
            mean: vec![f64::NAN; n],
            var: vec![f64::NAN; n],
            lethal: vec![false; n],
        }
    }

    pub fn zeros(geometry: GridGeometry) -> Self {
        let n = geometry.len();
        Self {
            geometry,
            mean: vec![0.0; n],
            var: vec![0.0; n],
            lethal: vec![false; n],
        }
    }

    pub fn is_known(&self, idx: usize) -> bool {
        !self.mean[idx].is_nan()
    }

    pub fn cell(&self, idx: usize) -> Option<CellRisk> {
        self.is_known(idx).then(|| CellRisk {
            mu: self.mean[idx],
            sigma: self.var[idx].max(0.0).sqrt(),
        })
    }

    pub(crate) fn set(&mut self, idx: usize, mean: f64, var: f64, lethal: bool) {
        self.mean[idx] = mean;
        self.var[idx] = var;
        self.lethal[idx] = lethal;
    }
}

/// Maps a threshold exceedance ratio `e = value / threshold` to a risk mean.
/// Quadratic below the threshold, lethal at or above it.
pub(crate) fn exceedance_mean(e: f64, lethal_mean: f64) -> (f64, bool) {
    if e >= 1.0 {
        (lethal_mean, true)
    } else {
        (lethal_mean * e * e, false)
    }
}
