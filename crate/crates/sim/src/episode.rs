//! One closed-loop run: sense, map, plan, act, with the behavior layer on top.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use step_core::behaviors::{integrate_unicycle, BehaviorCommand, BehaviorEvent, BehaviorInputs, BehaviorMachine};
use step_core::grid::{BeliefGridMap, GridGeometry};
use step_core::mpc::{plan_mpc, ControlInput, MpcMemory, MpcStatus, RobotState6};
use step_core::planner::{path_risk_cells, plan_astar, GeometricPath};
use step_core::riskmap::{
    aggregate_cvar, coverage_update, elevation_update, gap_mask, geometric_risk_layers, negative_obstacle_risk,
    record_returns, semantic_water_risk, surface_normals, terrain_risk, terrain_update, CvarMap, Factor,
    NormalField, ObstaclePoint, RiskFactorConfig,
};

use crate::config::SimConfig;
use crate::sensor::{sensor_model, Observation, SensorFrame};
use crate::world::World;
use crate::SimError;

/// The robot's accumulated map, including the latest obstacle return per cell.
#[derive(Debug, Clone)]
pub struct Belief {
    pub map: BeliefGridMap,
    obstacles: Vec<Option<ObstaclePoint>>,
}

impl Belief {
    pub fn new(geometry: GridGeometry) -> Self {
        Self {
            map: BeliefGridMap::new(geometry),
            obstacles: vec![None; geometry.len()],
        }
    }

    pub fn integrate(&mut self, obs: &Observation, cfg: &RiskFactorConfig) -> Result<(), SimError> {
        let g = *self.map.geometry();
        elevation_update(&mut self.map, &obs.ground, cfg.age_tau);
        terrain_update(&mut self.map, &obs.terrain);
        let intensity: Vec<f64> = obs.intensity.iter().map(|v| if v.is_nan() { 0.0 } else { *v }).collect();
        record_returns(&mut self.map, obs.position, &obs.views, &obs.returned, &intensity)?;
        coverage_update(&mut self.map, obs.position, &obs.views, cfg.d_cover)?;
        for p in &obs.obstacles {
            if let Some((ix, iy)) = g.cell_at(p.x, p.y) {
                self.obstacles[g.index(ix, iy)] = Some(*p);
            }
        }
        Ok(())
    }

    /// Aggregated CVaR map at `alpha` and the surface normals it was built from.
    pub fn cvar(&self, alpha: f64, cfg: &RiskFactorConfig) -> Result<(CvarMap, NormalField), SimError> {
        let normals = surface_normals(&self.map, cfg.normal_radius)?;
        let points: Vec<ObstaclePoint> = self.obstacles.iter().flatten().copied().collect();
        let geo = geometric_risk_layers(&self.map, &normals, &points, cfg)?;
        let terrain = terrain_risk(&self.map, cfg)?;
        let gap = gap_mask(&self.map)?;
        let neg = negative_obstacle_risk(&self.map, &gap, cfg)?;
        let sem = semantic_water_risk(&self.map, &gap, cfg)?;
        let cvar = aggregate_cvar(
            &[
                (Factor::Terrain, &terrain),
                (Factor::Step, &geo.step),
                (Factor::Slope, &geo.slope),
                (Factor::Collision, &geo.collision),
                (Factor::NegativeObstacle, &neg),
                (Factor::Semantic, &sem),
            ],
            cfg,
            alpha,
        )?;
        Ok((cvar, normals))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Goal,
    Unreachable,
    Stuck,
    EmergencyStop,
    Collision,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub alpha: f64,
    pub path_length: f64,
    /// Largest truth CVaR, at the evaluation level, of any cell the robot occupied.
    pub max_risk: f64,
    /// Compounded truth risk at `alpha` over the visited cells.
    pub j_pos: f64,
    pub success: bool,
    pub termination: Termination,
    pub steps: usize,
    pub wall_ms: f64,
    pub final_position: [f64; 2],
    pub crossed_lethal: bool,
    pub events: Vec<BehaviorEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub speed: f64,
    pub alpha: f64,
    pub mode: String,
    pub mpc_status: String,
    pub truth_cvar: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub rows: Vec<TraceRow>,
}

enum Maneuver {
    None,
    /// Drive along `path`; `reverse` keeps the stored headings (backing up).
    Follow { path: Vec<[f64; 3]>, speed: f64, reverse: bool },
    Wiggle { cmds: Vec<[f64; 2]>, next: usize },
}

/// Belief window: the start-goal bounding box grown by `margin`, clipped to
/// the world and aligned with its cells.
pub fn belief_geometry(world: &World, start: [f64; 2], goal: [f64; 2], margin: f64) -> GridGeometry {
    let g = world.geometry;
    let lo = |a: f64, b: f64, o: f64, n: usize| (((a.min(b) - margin - o) / g.resolution).floor().max(0.0) as usize).min(n - 1);
    let hi = |a: f64, b: f64, o: f64, n: usize| (((a.max(b) + margin - o) / g.resolution).ceil().max(1.0) as usize).min(n);
    let (x0, x1) = (lo(start[0], goal[0], g.origin[0], g.width), hi(start[0], goal[0], g.origin[0], g.width));
    let (y0, y1) = (lo(start[1], goal[1], g.origin[1], g.height), hi(start[1], goal[1], g.origin[1], g.height));
    GridGeometry::new(
        [g.origin[0] + x0 as f64 * g.resolution, g.origin[1] + y0 as f64 * g.resolution],
        g.resolution,
        (x1 - x0).max(1),
        (y1 - y0).max(1),
    )
    .expect("window inside a valid grid")
}

/// Moves `dist` along `path` from `pos`, consuming reached waypoints.
/// Returns the new pose and whether the path is exhausted.
fn advance(pos: [f64; 2], heading: f64, path: &mut Vec<[f64; 3]>, dist: f64, reverse: bool) -> ([f64; 3], bool) {
    let mut p = pos;
    let mut th = heading;
    let mut left = dist;
    while let Some(&next) = path.first() {
        let (dx, dy) = (next[0] - p[0], next[1] - p[1]);
        let d = dx.hypot(dy);
        if d > 1e-12 && !reverse {
            th = dy.atan2(dx);
        }
        if d <= left {
            p = [next[0], next[1]];
            if reverse {
                th = next[2];
            }
            left -= d;
            path.remove(0);
        } else {
            p = [p[0] + dx / d * left, p[1] + dy / d * left];
            break;
        }
    }
    ([p[0], p[1], th], path.is_empty())
}

fn geo_waypoints(path: &GeometricPath, pos: [f64; 2], goal: [f64; 2]) -> Vec<[f64; 2]> {
    let mut w = path.waypoints.clone();
    if let Some(first) = w.first_mut() {
        *first = pos;
    }
    if let Some(last) = w.last_mut() {
        *last = goal;
    }
    if w.len() == 1 {
        w.push(goal);
    }
    w
}

/// Runs one episode from `start` to `goal` at risk level `alpha`. `seed`
/// drives the sensor noise and MPC library sampling.
pub fn run_episode(
    world: &World,
    start: [f64; 2],
    goal: [f64; 2],
    alpha: f64,
    cfg: &SimConfig,
    seed: u64,
) -> Result<(EpisodeRecord, EpisodeTrace), SimError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SimError::Spec(format!("alpha {alpha} outside (0, 1)")));
    }
    let clock = Instant::now();
    let ec = &cfg.episode;
    let dt = cfg.mpc.dt;
    let geometry = belief_geometry(world, start, goal, ec.map_margin);
    let frame = SensorFrame::new(world, geometry);
    let mut belief = Belief::new(geometry);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e5f_0b5e);
    let mut mpc_cfg = cfg.mpc.clone();
    mpc_cfg.seed = seed;

    let heading = (goal[1] - start[1]).atan2(goal[0] - start[0]);
    let mut x = RobotState6::new(start[0], start[1], heading);
    let mut machine = BehaviorMachine::new(step_core::behaviors::BehaviorConfig { posture: alpha, ..cfg.behaviors });
    let alpha_min = cfg.behaviors.alpha.alpha_min;
    let mut alpha_cur = alpha;
    let mut maps: Option<(CvarMap, NormalField)> = None;
    let mut maps_alpha = f64::NAN;
    let mut dirty = true;
    let mut geo: Option<Vec<[f64; 2]>> = None;
    let mut geo_ok = false;
    let mut geo_failures = 0usize;
    let mut last_plan: Option<usize> = None;
    let mut memory = MpcMemory::default();
    let mut mpc_status = MpcStatus::Optimized;
    let mut maneuver = Maneuver::None;
    let mut maneuver_done = false;

    let truth_eval = |p: [f64; 2]| -> (Option<usize>, f64) {
        match world.geometry.cell_at(p[0], p[1]) {
            Some((ix, iy)) => {
                let i = world.geometry.index(ix, iy);
                (Some(i), world.cell_cvar(i, ec.risk_eval_alpha))
            }
            None => (None, f64::INFINITY),
        }
    };
    let (c0, r0) = truth_eval(start);
    let mut visited: Vec<usize> = c0.into_iter().collect();
    let mut max_risk = r0;
    let mut length = 0.0;
    let mut crossed = world.lethal_at(start);
    let mut trace = EpisodeTrace::default();
    let mut termination = Termination::Timeout;
    let mut steps = 0;

    for cycle in 0..ec.max_cycles {
        steps = cycle + 1;
        let pos = x.position();
        if cycle % ec.sense_every.max(1) == 0 {
            let obs = sensor_model(world, &frame, pos, &cfg.sensor, &mut rng);
            belief.integrate(&obs, &cfg.risk)?;
            dirty = true;
        }
        let mut replan = geo.is_none() || last_plan.is_none_or(|k| cycle >= k + ec.replan_every);
        if dirty || maps_alpha != alpha_cur {
            maps = Some(belief.cvar(alpha_cur, &cfg.risk)?);
            replan |= maps_alpha != alpha_cur;
            maps_alpha = alpha_cur;
            dirty = false;
            if let (Some((m, _)), Some(path)) = (&maps, &geo) {
                let g = m.geometry();
                replan |= path.iter().skip(1).any(|p| g.cell_at(p[0], p[1]).is_some_and(|(i, j)| m.is_lethal(g.index(i, j))));
            }
        }
        let (cvar, normals) = maps.as_ref().expect("built on the first cycle");
        if replan && matches!(maneuver, Maneuver::None) {
            last_plan = Some(cycle);
            match plan_astar(cvar, pos, goal, &cfg.astar) {
                Ok(p) => {
                    geo = Some(geo_waypoints(&p, pos, goal));
                    geo_ok = true;
                    geo_failures = 0;
                }
                Err(_) => {
                    geo_ok = false;
                    geo_failures += 1;
                }
            }
        }
        if !geo_ok && geo_failures >= ec.unreachable_patience && alpha_cur <= alpha_min + 1e-12 {
            termination = Termination::Unreachable;
            break;
        }

        let mut inp = BehaviorInputs::at(cycle as f64 * dt, dt, [pos[0], pos[1], x.theta]);
        inp.pitch = world.pitch_at(pos, x.theta);
        inp.speed = x.speed();
        inp.commanded = true;
        inp.plan_feasible = geo_ok && mpc_status != MpcStatus::Emergency;
        inp.cvar = Some(cvar);
        inp.ceiling_height = world.ceiling_at(pos);
        inp.action_done = maneuver_done;
        let cmd = machine.step(&inp);
        maneuver_done = false;

        let cmd = match cmd {
            BehaviorCommand::Backtrack { path, speed } => {
                maneuver = Maneuver::Follow { path, speed, reverse: true };
                BehaviorCommand::Hold
            }
            BehaviorCommand::Wiggle(cmds) => {
                maneuver = Maneuver::Wiggle { cmds, next: 0 };
                BehaviorCommand::Hold
            }
            BehaviorCommand::Escape(plan) => {
                let rho = plan.schedule.last().copied().unwrap_or(cvar.rho_max());
                let path = plan_astar(&cvar.relaxed(rho), pos, plan.goal.position, &cfg.astar)
                    .map(|p| p.waypoints.iter().map(|w| [w[0], w[1], 0.0]).collect())
                    .unwrap_or_default();
                maneuver = Maneuver::Follow { path, speed: ec.maneuver_speed, reverse: false };
                BehaviorCommand::Hold
            }
            other => other,
        };

        match cmd {
            BehaviorCommand::Nominal { alpha: a } => {
                if !matches!(maneuver, Maneuver::None) {
                    maneuver = Maneuver::None;
                    memory = MpcMemory::default();
                    last_plan = None;
                }
                alpha_cur = a;
                match &geo {
                    Some(path) if geo_ok || mpc_status != MpcStatus::Emergency => {
                        let out = plan_mpc(&x, &memory, path, cvar, Some(normals), &mpc_cfg);
                        x = out.trajectory.states[1];
                        memory = out.memory;
                        mpc_status = out.status;
                    }
                    _ => {
                        let u = ControlInput([-x.vx.signum() * cfg.mpc.limits.accel[0].min(x.vx.abs() / dt), 0.0, 0.0]);
                        x = cfg.mpc.model.step(&x, &u, dt);
                        mpc_status = MpcStatus::Emergency;
                    }
                }
            }
            BehaviorCommand::Hold => match &mut maneuver {
                Maneuver::Follow { path, speed, reverse } => {
                    let (p, done) = advance(pos, x.theta, path, *speed * dt, *reverse);
                    x = RobotState6::new(p[0], p[1], p[2]);
                    x.vx = if *reverse { -*speed } else { *speed };
                    maneuver_done = done;
                }
                Maneuver::Wiggle { cmds, next } => {
                    if let Some(c) = cmds.get(*next) {
                        let p = integrate_unicycle([pos[0], pos[1], x.theta], &[*c], dt)[1];
                        // the wiggle is open loop; a step into a mapped lethal cell is held
                        let g = cvar.geometry();
                        if g.cell_at(p[0], p[1]).is_some_and(|(i, j)| !cvar.is_lethal(g.index(i, j))) {
                            x = RobotState6::new(p[0], p[1], p[2]);
                            x.vx = c[0];
                            x.vtheta = c[1];
                        } else {
                            x.vx = 0.0;
                            x.vtheta = 0.0;
                        }
                        *next += 1;
                    }
                    maneuver_done = *next >= cmds.len();
                }
                Maneuver::None => maneuver_done = true,
            },
            BehaviorCommand::Stop => {
                let trigger = machine.events().last().map(|e| e.trigger.as_str()).unwrap_or("");
                termination = match trigger {
                    "stuck" => Termination::Stuck,
                    "escape_failed" => Termination::Unreachable,
                    _ => Termination::EmergencyStop,
                };
                break;
            }
            _ => unreachable!("maneuvers are converted to Hold above"),
        }

        let np = x.position();
        length += (np[0] - pos[0]).hypot(np[1] - pos[1]);
        let (cell, risk) = truth_eval(np);
        max_risk = max_risk.max(risk);
        if let Some(c) = cell {
            if visited.last() != Some(&c) {
                visited.push(c);
            }
        }
        if world.lethal_at(np) {
            crossed = true;
        }
        trace.rows.push(TraceRow {
            step: cycle,
            t: (cycle + 1) as f64 * dt,
            x: np[0],
            y: np[1],
            theta: x.theta,
            speed: x.vx,
            alpha: alpha_cur,
            mode: machine.mode().name().to_string(),
            mpc_status: format!("{mpc_status:?}").to_lowercase(),
            truth_cvar: risk,
        });
        if crossed {
            termination = Termination::Collision;
            break;
        }
        let to_goal = (goal[0] - np[0]).hypot(goal[1] - np[1]);
        if to_goal <= ec.goal_tolerance {
            // the tracking layer finishes the last few centimeters
            length += to_goal;
            termination = Termination::Goal;
            break;
        }
    }

    let j_pos = path_risk_cells(
        &world.truth_cvar(alpha),
        &visited.iter().map(|&i| world.geometry.cell_of_index(i)).collect::<Vec<_>>(),
    );
    let final_position = trace.rows.last().map(|r| [r.x, r.y]).unwrap_or(start);
    let record = EpisodeRecord {
        seed,
        alpha,
        path_length: length,
        max_risk,
        j_pos,
        success: termination == Termination::Goal,
        termination,
        steps,
        wall_ms: clock.elapsed().as_secs_f64() * 1e3,
        final_position,
        crossed_lethal: crossed,
        events: machine.take_events(),
    };
    Ok((record, trace))
}
