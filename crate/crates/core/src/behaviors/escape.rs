use serde::Serialize;
use thiserror::Error;

use crate::grid::line_cells;
use crate::riskmap::CvarMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct EscapeConfig {
    /// Seconds the robot cell must stay lethal before escaping.
    pub dwell_time: f64,
    /// Additive increase of `rho_max` per relaxation step.
    pub rho_step: f64,
    pub max_relaxations: usize,
}

impl Default for EscapeConfig {
    fn default() -> Self {
        Self {
            dwell_time: 1.0,
            rho_step: 0.25,
            max_relaxations: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeGoal {
    pub cell: (usize, usize),
    pub position: [f64; 2],
    /// Lethal cells on the straight raster line from the robot cell, goal excluded.
    pub crossings: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapePlan {
    pub goal: EscapeGoal,
    /// Every `rho_max` tried, in order; the last one made the goal reachable.
    pub schedule: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EscapeFailure {
    #[error("robot is off the map")]
    OffMap,
    #[error("no non-lethal cell on the map")]
    NoSafeCell,
    #[error("escape goal unreachable after every relaxation")]
    Unreachable,
}

/// Non-lethal cell minimizing (lethal crossings, distance, row-major index)
/// as seen from the robot cell.
pub fn escape_goal(map: &CvarMap, robot: [f64; 2]) -> Result<EscapeGoal, EscapeFailure> {
    let g = map.geometry();
    let src = g.cell_at(robot[0], robot[1]).ok_or(EscapeFailure::OffMap)?;
    let c0 = g.center(src.0, src.1);
    // the robot cell lies on every line, so it bounds the crossing count from below
    let floor = usize::from(map.is_lethal(g.index(src.0, src.1)));
    let mut best: Option<(usize, f64, usize)> = None;
    for idx in 0..g.len() {
        if map.is_lethal(idx) {
            continue;
        }
        let (ix, iy) = g.cell_of_index(idx);
        let c = g.center(ix, iy);
        let dist = (c[0] - c0[0]).hypot(c[1] - c0[1]);
        if best.is_some_and(|(bc, bd, _)| bc == floor && dist >= bd) {
            continue;
        }
        let crossings = line_cells(src, (ix, iy))
            .into_iter()
            .filter(|&(x, y)| (x, y) != (ix, iy) && map.is_lethal(g.index(x, y)))
            .count();
        // indices ascend, so a tie on (crossings, distance) keeps the earlier cell
        if best.is_none_or(|(bc, bd, _)| crossings < bc || (crossings == bc && dist < bd)) {
            best = Some((crossings, dist, idx));
        }
    }
    let (crossings, distance, idx) = best.ok_or(EscapeFailure::NoSafeCell)?;
    let cell = g.cell_of_index(idx);
    Ok(EscapeGoal {
        cell,
        position: g.center(cell.0, cell.1),
        crossings,
        distance,
    })
}

/// Picks the escape goal, then raises `rho_max` step by step until
/// `reachable(relaxed_map, goal)` holds.
pub fn escape_lethal<F>(map: &CvarMap, robot: [f64; 2], cfg: &EscapeConfig, mut reachable: F) -> Result<EscapePlan, EscapeFailure>
where
    F: FnMut(&CvarMap, &EscapeGoal) -> bool,
{
    let goal = escape_goal(map, robot)?;
    let mut schedule = Vec::new();
    for k in 1..=cfg.max_relaxations {
        let rho = map.rho_max() + k as f64 * cfg.rho_step;
        schedule.push(rho);
        if reachable(&map.relaxed(rho), &goal) {
            return Ok(EscapePlan { goal, schedule });
        }
    }
    Err(EscapeFailure::Unreachable)
}
