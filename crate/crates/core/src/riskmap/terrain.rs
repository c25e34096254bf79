use crate::error::Result;
use crate::grid::{layers, BeliefGridMap};
use crate::riskmap::{RiskFactorConfig, RiskLayer};

/// A direct traversability-cost observation of the cell containing `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerrainSample {
    pub x: f64,
    pub y: f64,
    pub cost: f64,
}

/// Welford running mean and sum of squared deviations per cell. Samples off
/// the map or non-finite are ignored; returns how many were used.
pub fn terrain_update(map: &mut BeliefGridMap, samples: &[TerrainSample]) -> usize {
    let g = *map.geometry();
    let mut count = std::mem::take(map.ensure_layer(layers::TERRAIN_COUNT, 0.0));
    let mut mean = std::mem::take(map.ensure_layer(layers::TERRAIN_MEAN, f64::NAN));
    let mut m2 = std::mem::take(map.ensure_layer(layers::TERRAIN_M2, 0.0));
    let mut used = 0;
    for s in samples {
        let Some((ix, iy)) = g.cell_at(s.x, s.y) else { continue };
        if !s.cost.is_finite() {
            continue;
        }
        let i = g.index(ix, iy);
        count[i] += 1.0;
        if count[i] == 1.0 {
            mean[i] = s.cost;
            m2[i] = 0.0;
        } else {
            let d = s.cost - mean[i];
            mean[i] += d / count[i];
            m2[i] += d * (s.cost - mean[i]);
        }
        used += 1;
    }
    map.set_layer(layers::TERRAIN_COUNT, count).expect("same shape");
    map.set_layer(layers::TERRAIN_MEAN, mean).expect("same shape");
    map.set_layer(layers::TERRAIN_M2, m2).expect("same shape");
    used
}

/// Terrain factor from the running statistics. The variance estimate shrinks
/// the sample variance toward `max_sigma²` with one pseudo-observation, so a
/// single sample reports `max_sigma²`.
pub fn terrain_risk(map: &BeliefGridMap, cfg: &RiskFactorConfig) -> Result<RiskLayer> {
    let g = *map.geometry();
    let count = map.layer(layers::TERRAIN_COUNT)?;
    let mean = map.layer(layers::TERRAIN_MEAN)?;
    let m2 = map.layer(layers::TERRAIN_M2)?;
    let mut out = RiskLayer::unknown(g);
    for i in 0..g.len() {
        if count[i] > 0.0 {
            let var = (cfg.max_sigma.powi(2) + m2[i]) / count[i];
            out.set(i, mean[i].max(0.0), var, false);
        }
    }
    Ok(out)
}
