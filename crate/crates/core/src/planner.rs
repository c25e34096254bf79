//! A* over the CVaR layer minimizing compounded path risk plus weighted path length.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{CoreError, Result};
use crate::riskmap::CvarMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthCost {
    /// `λ·‖x_k − x_{k+1}‖²` per step.
    Squared,
    /// `λ·‖x_k − x_{k+1}‖` per step.
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AstarConfig {
    pub lambda: f64,
    pub length_cost: LengthCost,
    /// Non-lethal cells within this distance of a lethal cell pay an extra
    /// cost decaying linearly from `clearance_cost` to zero.
    pub clearance_radius: f64,
    pub clearance_cost: f64,
}

impl Default for AstarConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            length_cost: LengthCost::Squared,
            clearance_radius: 0.0,
            clearance_cost: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometricPath {
    pub cells: Vec<(usize, usize)>,
    pub waypoints: Vec<[f64; 2]>,
    /// Compounded risk `J_pos` of the path.
    pub total_risk_cost: f64,
    pub total_length: f64,
    /// Objective value the search minimized.
    pub total_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PlanFailure {
    #[error("start is off the map")]
    StartOffMap,
    #[error("goal is off the map")]
    GoalOffMap,
    #[error("start cell is lethal")]
    StartLethal,
    #[error("goal cell is lethal")]
    GoalLethal,
    #[error("goal unreachable")]
    Unreachable,
}

/// `J_pos = μ₀ + Σ_{k≥1} CVaR_α(R_k)` over the cells containing `waypoints`.
pub fn path_risk(map: &CvarMap, waypoints: &[[f64; 2]]) -> Result<f64> {
    let g = map.geometry();
    let mut cells = Vec::with_capacity(waypoints.len());
    for p in waypoints {
        let (ix, iy) = g.cell_at(p[0], p[1]).ok_or(CoreError::OffMap { x: p[0], y: p[1] })?;
        cells.push((ix, iy));
    }
    Ok(path_risk_cells(map, &cells))
}

pub fn path_risk_cells(map: &CvarMap, cells: &[(usize, usize)]) -> f64 {
    let g = map.geometry();
    let Some((first, rest)) = cells.split_first() else {
        return 0.0;
    };
    map.mean(g.index(first.0, first.1)) + rest.iter().map(|c| map.cvar(g.index(c.0, c.1))).sum::<f64>()
}

/// Per-cell clearance penalty as configured in `cfg`.
pub fn clearance_penalty(map: &CvarMap, cfg: &AstarConfig) -> Vec<f64> {
    let g = map.geometry();
    let mut out = vec![0.0; g.len()];
    if cfg.clearance_radius <= 0.0 || cfg.clearance_cost <= 0.0 {
        return out;
    }
    for idx in 0..g.len() {
        if !map.is_lethal(idx) {
            continue;
        }
        let (ix, iy) = g.cell_of_index(idx);
        let c = g.center(ix, iy);
        for (nx, ny) in g.cells_within(c[0], c[1], cfg.clearance_radius) {
            let j = g.index(nx, ny);
            let n = g.center(nx, ny);
            let d = (n[0] - c[0]).hypot(n[1] - c[1]);
            let p = cfg.clearance_cost * (1.0 - d / cfg.clearance_radius);
            if p > out[j] {
                out[j] = p;
            }
        }
    }
    out
}

#[derive(PartialEq)]
struct Entry {
    f: f64,
    h: f64,
    idx: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f)
            .then_with(|| o.h.total_cmp(&self.h))
            .then_with(|| o.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

fn step_length_cost(len: f64, cfg: &AstarConfig) -> f64 {
    match cfg.length_cost {
        LengthCost::Squared => cfg.lambda * len * len,
        LengthCost::Euclidean => cfg.lambda * len,
    }
}

fn heuristic(d: f64, resolution: f64, cfg: &AstarConfig) -> f64 {
    // Every 8-connected step has length s ≥ res, so λs² ≥ λ·res·s and the
    // remaining squared-length cost is at least λ·res·(straight-line distance).
    match cfg.length_cost {
        LengthCost::Squared => cfg.lambda * resolution * d,
        LengthCost::Euclidean => cfg.lambda * d,
    }
}

pub fn plan_astar(map: &CvarMap, start: [f64; 2], goal: [f64; 2], cfg: &AstarConfig) -> std::result::Result<GeometricPath, PlanFailure> {
    let g = map.geometry();
    let s = g.cell_at(start[0], start[1]).ok_or(PlanFailure::StartOffMap)?;
    let t = g.cell_at(goal[0], goal[1]).ok_or(PlanFailure::GoalOffMap)?;
    plan_astar_cells(map, s, t, cfg)
}

/// 8-connected A*. Entering a cell costs its CVaR plus clearance penalty plus
/// the step length term; the start cell costs its mean. Lethal cells are never
/// entered. Ties on `f` prefer the lower heuristic, then the lower row-major index.
pub fn plan_astar_cells(
    map: &CvarMap,
    start: (usize, usize),
    goal: (usize, usize),
    cfg: &AstarConfig,
) -> std::result::Result<GeometricPath, PlanFailure> {
    let g = *map.geometry();
    let si = g.index(start.0, start.1);
    let gi = g.index(goal.0, goal.1);
    if map.is_lethal(si) {
        return Err(PlanFailure::StartLethal);
    }
    if map.is_lethal(gi) {
        return Err(PlanFailure::GoalLethal);
    }
    let penalty = clearance_penalty(map, cfg);
    let goal_c = g.center(goal.0, goal.1);
    let h_of = |idx: usize| {
        let (ix, iy) = g.cell_of_index(idx);
        let c = g.center(ix, iy);
        heuristic((c[0] - goal_c[0]).hypot(c[1] - goal_c[1]), g.resolution, cfg)
    };

    let n = g.len();
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    best[si] = map.mean(si) + penalty[si];
    open.push(Entry { f: best[si] + h_of(si), h: h_of(si), idx: si });

    while let Some(Entry { idx, .. }) = open.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        if idx == gi {
            break;
        }
        let (ix, iy) = g.cell_of_index(idx);
        let h_here = h_of(idx);
        for (nx, ny) in g.neighbors8(ix, iy) {
            let j = g.index(nx, ny);
            if closed[j] || map.is_lethal(j) {
                continue;
            }
            let diag = nx != ix && ny != iy;
            let len = if diag { g.resolution * std::f64::consts::SQRT_2 } else { g.resolution };
            let step = step_length_cost(len, cfg);
            let h_next = h_of(j);
            debug_assert!(h_here <= step + h_next + 1e-12, "inconsistent heuristic");
            let cand = best[idx] + map.cvar(j) + penalty[j] + step;
            if cand < best[j] {
                best[j] = cand;
                parent[j] = idx;
                open.push(Entry { f: cand + h_next, h: h_next, idx: j });
            }
        }
    }
    if !closed[gi] {
        return Err(PlanFailure::Unreachable);
    }

    let mut rev = vec![gi];
    while *rev.last().unwrap() != si {
        rev.push(parent[*rev.last().unwrap()]);
    }
    rev.reverse();
    let cells: Vec<(usize, usize)> = rev.iter().map(|&i| g.cell_of_index(i)).collect();
    let waypoints: Vec<[f64; 2]> = cells.iter().map(|&(x, y)| g.center(x, y)).collect();
    let total_length = waypoints.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).sum();
    Ok(GeometricPath {
        total_risk_cost: path_risk_cells(map, &cells),
        cells,
        waypoints,
        total_length,
        total_cost: best[gi],
    })
}
