use crate::error::{CoreError, Result};
use crate::grid::{layers, BeliefGridMap, CellView};
use crate::riskmap::{RiskFactorConfig, RiskLayer};

/// Accumulates return statistics for one sensor sweep from `pos`: per-cell
/// return and no-return counts, running mean intensity of returns, and the
/// range of the latest observation.
pub fn record_returns(
    map: &mut BeliefGridMap,
    pos: [f64; 2],
    views: &[CellView],
    returned: &[bool],
    intensity: &[f64],
) -> Result<()> {
    let g = *map.geometry();
    if views.len() != g.len() || returned.len() != g.len() || intensity.len() != g.len() {
        return Err(CoreError::Shape("sweep arrays must match the grid".into()));
    }
    let mut hits = std::mem::take(map.ensure_layer(layers::RETURN_COUNT, 0.0));
    let mut gaps = std::mem::take(map.ensure_layer(layers::GAP_COUNT, 0.0));
    let mut inten = std::mem::take(map.ensure_layer(layers::INTENSITY, f64::NAN));
    let mut range = std::mem::take(map.ensure_layer(layers::RANGE, f64::NAN));
    for i in 0..g.len() {
        if views[i] != CellView::Visible {
            continue;
        }
        let (ix, iy) = g.cell_of_index(i);
        let c = g.center(ix, iy);
        range[i] = (c[0] - pos[0]).hypot(c[1] - pos[1]);
        if returned[i] {
            hits[i] += 1.0;
            inten[i] = if inten[i].is_nan() {
                intensity[i]
            } else {
                inten[i] + (intensity[i] - inten[i]) / hits[i]
            };
        } else {
            gaps[i] += 1.0;
        }
    }
    map.set_layer(layers::RETURN_COUNT, hits)?;
    map.set_layer(layers::GAP_COUNT, gaps)?;
    map.set_layer(layers::INTENSITY, inten)?;
    map.set_layer(layers::RANGE, range)
}

/// Cells seen at least once and never returning a point.
pub fn gap_mask(map: &BeliefGridMap) -> Result<Vec<bool>> {
    let hits = map.layer(layers::RETURN_COUNT)?;
    let gaps = map.layer(layers::GAP_COUNT)?;
    Ok(hits.iter().zip(gaps).map(|(h, g)| *h == 0.0 && *g > 0.0).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapClass {
    Water,
    NegativeObstacle,
    Uncovered,
}

fn observed(map: &BeliefGridMap) -> Result<Vec<bool>> {
    let hits = map.layer(layers::RETURN_COUNT)?;
    let gaps = map.layer(layers::GAP_COUNT)?;
    Ok(hits.iter().zip(gaps).map(|(h, g)| h + g > 0.0).collect())
}

/// Mean intensity of returning cells in the Chebyshev ring 1..=2 around a cell.
fn ring_intensity(map: &BeliefGridMap, gap: &[bool], ix: usize, iy: usize) -> Result<Option<f64>> {
    let g = map.geometry();
    let inten = map.layer(layers::INTENSITY)?;
    let (mut sum, mut n) = (0.0, 0usize);
    for dy in -2i64..=2 {
        for dx in -2i64..=2 {
            if dx == 0 && dy == 0 {
                continue;
            }
            let (nx, ny) = (ix as i64 + dx, iy as i64 + dy);
            if nx < 0 || ny < 0 || nx as usize >= g.width || ny as usize >= g.height {
                continue;
            }
            let j = g.index(nx as usize, ny as usize);
            if !gap[j] && !inten[j].is_nan() {
                sum += inten[j];
                n += 1;
            }
        }
    }
    Ok((n > 0).then(|| sum / n as f64))
}

/// Classifies every gap cell. Water (low-intensity surroundings) takes
/// precedence over a covered negative obstacle.
pub fn classify_gaps(map: &BeliefGridMap, gap: &[bool], cfg: &RiskFactorConfig) -> Result<Vec<Option<GapClass>>> {
    let g = *map.geometry();
    if gap.len() != g.len() {
        return Err(CoreError::Shape("gap mask".into()));
    }
    let mse = map.layer(layers::COVER_MSE)?;
    let mut out = vec![None; g.len()];
    for (i, slot) in out.iter_mut().enumerate() {
        if !gap[i] {
            continue;
        }
        let (ix, iy) = g.cell_of_index(i);
        let water = ring_intensity(map, gap, ix, iy)?.is_some_and(|m| m < cfg.intensity_cutoff);
        *slot = Some(if water {
            GapClass::Water
        } else if mse[i] >= 0.0 {
            GapClass::NegativeObstacle
        } else {
            GapClass::Uncovered
        });
    }
    Ok(out)
}

/// Risk from missing returns. A gap that is sufficiently covered (`mse ≥ 0`)
/// is lethal. An insufficiently covered gap gets a low mean with a larger
/// deviation. Returning cells carry no risk and never-observed cells are unknown.
pub fn negative_obstacle_risk(map: &BeliefGridMap, gap: &[bool], cfg: &RiskFactorConfig) -> Result<RiskLayer> {
    let g = *map.geometry();
    if gap.len() != g.len() {
        return Err(CoreError::Shape("gap mask".into()));
    }
    let mse = map.layer(layers::COVER_MSE)?;
    let range = map.layer(layers::RANGE)?;
    let seen = observed(map)?;
    let mut out = RiskLayer::unknown(g);
    for i in 0..g.len() {
        if !seen[i] {
            continue;
        }
        let rv = cfg.range_var(if range[i].is_nan() { 0.0 } else { range[i] });
        if !gap[i] {
            out.set(i, 0.0, 0.0, false);
        } else if mse[i] >= 0.0 {
            out.set(i, cfg.lethal_mean, cfg.covered_gap_sigma.powi(2) + rv, true);
        } else {
            out.set(i, cfg.uncovered_gap_mean, cfg.uncovered_gap_sigma.powi(2) + rv, false);
        }
    }
    Ok(out)
}

/// Water and mud from intensity. Gaps with low-intensity surroundings are
/// water (lethal). Returning cells with low intensity are mud, a non-lethal
/// mean of `cfg.mud_mean`. Other observed cells carry no semantic risk.
pub fn semantic_water_risk(map: &BeliefGridMap, gap: &[bool], cfg: &RiskFactorConfig) -> Result<RiskLayer> {
    let g = *map.geometry();
    let classes = classify_gaps(map, gap, cfg)?;
    let inten = map.layer(layers::INTENSITY)?;
    let range = map.layer(layers::RANGE)?;
    let seen = observed(map)?;
    let mut out = RiskLayer::unknown(g);
    for i in 0..g.len() {
        if !seen[i] {
            continue;
        }
        let rv = cfg.range_var(if range[i].is_nan() { 0.0 } else { range[i] });
        match classes[i] {
            Some(GapClass::Water) => out.set(i, cfg.lethal_mean, rv, true),
            Some(_) => out.set(i, 0.0, 0.0, false),
            None if inten[i] < cfg.intensity_cutoff => out.set(i, cfg.mud_mean, rv, false),
            None => out.set(i, 0.0, 0.0, false),
        }
    }
    Ok(out)
}
