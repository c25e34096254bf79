use crate::riskmap::CvarMap;

use super::config::MpcConfig;
use super::geometry::{in_collision, ConvexPolygon};
use super::library::{Trajectory, TrajectorySource};
use super::model::{wrap_angle, ControlInput, RobotState6};

/// Everything the trajectory cost depends on.
#[derive(Debug, Clone, Copy)]
pub struct CostContext<'a> {
    pub map: &'a CvarMap,
    pub obstacles: &'a [ConvexPolygon],
    pub reference: &'a [RobotState6],
    pub cfg: &'a MpcConfig,
}

impl CostContext<'_> {
    pub fn tracking_cost(&self, states: &[RobotState6]) -> f64 {
        let nx = self.cfg.model.nx();
        let w = &self.cfg.tracking_weights;
        states
            .iter()
            .zip(self.reference)
            .map(|(x, r)| {
                let (a, b) = (x.to_array(), r.to_array());
                (0..nx)
                    .map(|i| {
                        let d = if i == 2 { wrap_angle(a[i] - b[i]) } else { a[i] - b[i] };
                        w[i] * d * d
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    /// Summed CVaR over steps 1..T using bilinear interpolation.
    pub fn risk_cost(&self, states: &[RobotState6]) -> f64 {
        states.iter().skip(1).map(|x| self.map.interpolate(x.px, x.py)).sum::<f64>() * self.cfg.risk_weight
    }

    pub fn control_cost(&self, controls: &[ControlInput]) -> f64 {
        let nu = self.cfg.model.nu();
        self.cfg.control_weight * controls.iter().map(|u| u.0[..nu].iter().map(|v| v * v).sum::<f64>()).sum::<f64>()
    }

    pub fn cost(&self, states: &[RobotState6], controls: &[ControlInput]) -> f64 {
        self.tracking_cost(states) + self.risk_cost(states) + self.control_cost(controls)
    }

    /// Steps `k ≥ 1` whose footprint touches an obstacle polygon or whose
    /// center lies in a lethal or off-map cell.
    pub fn violations(&self, states: &[RobotState6]) -> usize {
        let g = self.map.geometry();
        states
            .iter()
            .skip(1)
            .filter(|x| {
                let lethal_cell = match g.cell_at(x.px, x.py) {
                    Some((ix, iy)) => self.map.is_lethal(g.index(ix, iy)),
                    None => true,
                };
                if lethal_cell {
                    return true;
                }
                let fp = self.cfg.footprint.polygon(x);
                self.obstacles.iter().any(|o| in_collision(&fp, o))
            })
            .count()
    }

    /// Fills `step_cvar` and `feasible` and returns `(cost, violations)`.
    pub fn evaluate(&self, traj: &mut Trajectory) -> (f64, usize) {
        traj.step_cvar = traj.states.iter().map(|x| self.map.at(x.px, x.py)).collect();
        let v = self.violations(&traj.states);
        traj.feasible = v == 0;
        (self.cost(&traj.states, &traj.controls), v)
    }
}

/// Index of the lowest-cost member without violations, else the stopping
/// member (or the first member if there is none).
pub fn choose_candidate(library: &mut [Trajectory], ctx: &CostContext) -> usize {
    let mut best: Option<(f64, usize)> = None;
    for (i, t) in library.iter_mut().enumerate() {
        let (c, v) = ctx.evaluate(t);
        if v == 0 && best.is_none_or(|(bc, _)| c < bc) {
            best = Some((c, i));
        }
    }
    match best {
        Some((_, i)) => i,
        None => library.iter().position(|t| t.source == TrajectorySource::Stopping).unwrap_or(0),
    }
}
