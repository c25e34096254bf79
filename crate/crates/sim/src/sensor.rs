//! Simplified range sensor with range-dependent Gaussian noise.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use step_core::grid::{visibility, CellView, GridGeometry};
use step_core::riskmap::{ElevationPoint, ObstaclePoint, TerrainSample};

use crate::world::{CellKind, World};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    pub range: f64,
    /// Elevation noise deviation is `elevation_sigma + elevation_sigma_per_m · range`.
    pub elevation_sigma: f64,
    pub elevation_sigma_per_m: f64,
    /// Same for observed traversability cost.
    pub cost_sigma: f64,
    pub cost_sigma_per_m: f64,
    /// Height of wall returns above the ground (m).
    pub wall_height: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            range: 6.0,
            elevation_sigma: 0.01,
            elevation_sigma_per_m: 0.002,
            cost_sigma: 0.02,
            cost_sigma_per_m: 0.005,
            wall_height: 0.5,
        }
    }
}

impl SensorConfig {
    pub fn noiseless(range: f64) -> Self {
        Self {
            range,
            elevation_sigma: 0.0,
            elevation_sigma_per_m: 0.0,
            cost_sigma: 0.0,
            cost_sigma_per_m: 0.0,
            ..Self::default()
        }
    }
}

/// A belief-map grid aligned with the world grid, with the truth cell behind
/// each belief cell and the line-of-sight blockers.
#[derive(Debug, Clone)]
pub struct SensorFrame {
    pub geometry: GridGeometry,
    truth: Vec<Option<usize>>,
    blocking: Vec<bool>,
}

impl SensorFrame {
    pub fn new(world: &World, geometry: GridGeometry) -> Self {
        let truth: Vec<Option<usize>> = (0..geometry.len())
            .map(|i| {
                let (ix, iy) = geometry.cell_of_index(i);
                let c = geometry.center(ix, iy);
                world.geometry.cell_at(c[0], c[1]).map(|(x, y)| world.geometry.index(x, y))
            })
            .collect();
        let blocking = truth.iter().map(|t| t.is_some_and(|j| world.kind[j] == CellKind::Wall)).collect();
        Self { geometry, truth, blocking }
    }

    pub fn truth_index(&self, idx: usize) -> Option<usize> {
        self.truth[idx]
    }
}

/// One sweep, with every array indexed over the frame's geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub position: [f64; 2],
    pub views: Vec<CellView>,
    pub ground: Vec<ElevationPoint>,
    pub terrain: Vec<TerrainSample>,
    pub obstacles: Vec<ObstaclePoint>,
    pub returned: Vec<bool>,
    pub intensity: Vec<f64>,
}

/// Observes every cell within range and in 2-D line of sight. Ground cells
/// return a noisy elevation, a noisy cost sample drawn from the cell's cost
/// distribution, and their intensity. Walls return an obstacle point. Pits
/// and water return nothing.
pub fn sensor_model(
    world: &World,
    frame: &SensorFrame,
    position: [f64; 2],
    cfg: &SensorConfig,
    rng: &mut ChaCha8Rng,
) -> Observation {
    let g = frame.geometry;
    let views = visibility(&g, &frame.blocking, position, cfg.range);
    let n = g.len();
    let mut obs = Observation {
        position,
        views,
        ground: Vec::new(),
        terrain: Vec::new(),
        obstacles: Vec::new(),
        returned: vec![false; n],
        intensity: vec![f64::NAN; n],
    };
    for i in 0..n {
        if obs.views[i] != CellView::Visible {
            continue;
        }
        let Some(t) = frame.truth[i] else {
            obs.views[i] = CellView::OutOfRange;
            continue;
        };
        let (ix, iy) = g.cell_of_index(i);
        let c = g.center(ix, iy);
        let range = (c[0] - position[0]).hypot(c[1] - position[1]);
        match world.kind[t] {
            CellKind::Ground => {
                let es = cfg.elevation_sigma + cfg.elevation_sigma_per_m * range;
                let cs = cfg.cost_sigma + cfg.cost_sigma_per_m * range;
                let z_noise: f64 = rng.sample(StandardNormal);
                let draw: f64 = rng.sample(StandardNormal);
                let c_noise: f64 = rng.sample(StandardNormal);
                obs.ground.push(ElevationPoint {
                    x: c[0],
                    y: c[1],
                    z: world.elevation[t] + es * z_noise,
                    age: 0.0,
                    var: (es * es).max(1e-8),
                });
                obs.terrain.push(TerrainSample {
                    x: c[0],
                    y: c[1],
                    cost: world.cost_mean[t] + world.cost_sigma[t] * draw + cs * c_noise,
                });
                obs.returned[i] = true;
                obs.intensity[i] = world.intensity[t];
            }
            CellKind::Wall => {
                let ground = neighbor_ground(world, t);
                obs.obstacles.push(ObstaclePoint { x: c[0], y: c[1], z: ground + cfg.wall_height, range });
                obs.returned[i] = true;
                obs.intensity[i] = 0.8;
            }
            CellKind::Pit | CellKind::Water => {}
        }
    }
    obs
}

fn neighbor_ground(world: &World, idx: usize) -> f64 {
    let g = &world.geometry;
    let (ix, iy) = g.cell_of_index(idx);
    g.neighbors8(ix, iy)
        .map(|(x, y)| world.elevation[g.index(x, y)])
        .filter(|z| z.is_finite())
        .reduce(f64::min)
        .unwrap_or(0.0)
}
