use crate::error::Result;
use crate::grid::{layers, BeliefGridMap};
use crate::riskmap::{exceedance_mean, NormalField, RiskFactorConfig, RiskLayer};

/// A non-ground return with the range at which it was observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstaclePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub range: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometricLayers {
    pub step: RiskLayer,
    pub slope: RiskLayer,
    pub collision: RiskLayer,
}

/// Step, slope and collision risk from the elevation belief, surface normals
/// and obstacle returns.
///
/// Step and slope exceedance `e = value / threshold(range)` maps to mean
/// `L·e²` below 1 and to the lethal mean `L` at or above it. Their variance is
/// the elevation variance propagated through `L/threshold` plus a
/// range-proportional term. Obstacle points inside the collision height band
/// are lethal within the inscribed radius and decay quadratically to zero at
/// the inflation radius.
pub fn geometric_risk_layers(
    map: &BeliefGridMap,
    normals: &NormalField,
    obstacle_points: &[ObstaclePoint],
    cfg: &RiskFactorConfig,
) -> Result<GeometricLayers> {
    let g = *map.geometry();
    let elev = map.layer(layers::ELEVATION)?;
    let elev_var = map.layer(layers::ELEVATION_VAR)?;
    let range = map.layer(layers::RANGE).ok();
    let range_at = |idx: usize| range.map(|r| r[idx]).filter(|v| v.is_finite()).unwrap_or(0.0);
    let lm = cfg.lethal_mean;

    let mut step = RiskLayer::unknown(g);
    let mut slope = RiskLayer::unknown(g);
    let mut collision = RiskLayer::unknown(g);

    for iy in 0..g.height {
        for ix in 0..g.width {
            let idx = g.index(ix, iy);
            if elev[idx].is_nan() {
                continue;
            }
            let r = range_at(idx);
            collision.set(idx, 0.0, cfg.range_var(r), false);

            let mut gap: Option<(f64, f64)> = None;
            for (nx, ny) in g.neighbors8(ix, iy) {
                let j = g.index(nx, ny);
                if elev[j].is_nan() {
                    continue;
                }
                let d = (elev[j] - elev[idx]).abs();
                if gap.is_none_or(|(best, _)| d > best) {
                    gap = Some((d, elev_var[j]));
                }
            }
            if let Some((d, var_n)) = gap {
                let thr = cfg.step_threshold_at(r);
                let (mean, lethal) = exceedance_mean(d / thr, lm);
                let var = lm * lm * (elev_var[idx] + var_n) / (thr * thr) + cfg.range_var(r);
                step.set(idx, mean, var, lethal);
            }

            if let Some(n) = normals.normal(ix, iy) {
                let thr = cfg.slope_threshold_at(r);
                let angle = n[2].clamp(-1.0, 1.0).acos();
                let (mean, lethal) = exceedance_mean(angle / thr, lm);
                let var = lm * lm * elev_var[idx] / (cfg.normal_radius.powi(2) * thr * thr) + cfg.range_var(r);
                slope.set(idx, mean, var, lethal);
            }
        }
    }

    for p in obstacle_points {
        let Some((px, py)) = g.cell_at(p.x, p.y) else {
            continue;
        };
        let pidx = g.index(px, py);
        let ground = if !elev[pidx].is_nan() {
            Some(elev[pidx])
        } else {
            g.neighbors8(px, py)
                .map(|(nx, ny)| elev[g.index(nx, ny)])
                .filter(|z| !z.is_nan())
                .reduce(f64::min)
        };
        let Some(ground) = ground else { continue };
        let h = p.z - ground;
        if h < cfg.collision_band[0] || h > cfg.collision_band[1] {
            continue;
        }
        let var = cfg.range_var(p.range);
        for (cx, cy) in g.cells_within(p.x, p.y, cfg.inflation_radius.max(0.5 * g.resolution)) {
            let idx = g.index(cx, cy);
            let c = g.center(cx, cy);
            let d = (c[0] - p.x).hypot(c[1] - p.y);
            let (mean, lethal) = if d <= cfg.inscribed_radius || (cx, cy) == (px, py) {
                (lm, true)
            } else {
                let t = (cfg.inflation_radius - d) / (cfg.inflation_radius - cfg.inscribed_radius);
                (lm * t.clamp(0.0, 1.0).powi(2), false)
            };
            let known = collision.is_known(idx);
            if !known || mean > collision.mean[idx] || (lethal && !collision.lethal[idx]) {
                collision.set(idx, mean, var, lethal);
            }
        }
    }
    Ok(GeometricLayers { step, slope, collision })
}
