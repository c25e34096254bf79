use serde::{Deserialize, Serialize};
use step_qp::{solve_qp, QpStatus};

use crate::riskmap::{CvarMap, NormalField};

use super::config::MpcConfig;
use super::cost::{choose_candidate, CostContext};
use super::geometry::{decompose_obstacles, ConvexPolygon};
use super::library::{
    generate_trajectory_library, reference_trajectory, shift_controls, stopping_controls, Trajectory,
    TrajectorySource,
};
use super::linesearch::linesearch;
use super::model::{ControlInput, RobotState6};
use super::qp_build::build_qp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MpcStatus {
    Optimized,
    LibraryFallback,
    Emergency,
}

/// State carried between planning cycles.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MpcMemory {
    pub controls: Option<Vec<ControlInput>>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationInfo {
    pub candidate: String,
    pub qp_status: Option<QpStatus>,
    pub qp_iterations: usize,
    pub gamma: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct MpcOutput {
    pub trajectory: Trajectory,
    pub status: MpcStatus,
    pub memory: MpcMemory,
    pub cost: f64,
    pub obstacles: Vec<ConvexPolygon>,
    pub iterations: Vec<IterationInfo>,
}

/// Obstacle polygons in a square window around `center`.
pub fn obstacles_near(map: &CvarMap, center: [f64; 2], half_width: f64) -> Vec<ConvexPolygon> {
    let g = map.geometry();
    let r = g.resolution;
    let lo = |v: f64, o: f64| (((v - half_width - o) / r).floor().max(0.0)) as usize;
    let hi = |v: f64, o: f64, n: usize| ((((v + half_width - o) / r).ceil()).max(0.0) as usize).min(n);
    let window = (
        lo(center[0], g.origin[0]),
        lo(center[1], g.origin[1]),
        hi(center[0], g.origin[0], g.width),
        hi(center[1], g.origin[1], g.height),
    );
    decompose_obstacles(map, map.rho_max(), Some(window))
}

/// One receding-horizon planning cycle: reference update, control shift,
/// then `qp_iterations` rounds of library, candidate selection, QP,
/// linesearch and rollout, with library and stopping fallbacks.
pub fn plan_mpc(
    x0: &RobotState6,
    memory: &MpcMemory,
    geo_path: &[[f64; 2]],
    map: &CvarMap,
    normals: Option<&NormalField>,
    cfg: &MpcConfig,
) -> MpcOutput {
    let horizon = cfg.horizon;
    let reference = reference_trajectory(x0, geo_path, horizon, cfg.dt, cfg.v_ref);
    let previous = memory.controls.as_ref().map(|c| shift_controls(c, horizon));
    let obstacles = obstacles_near(map, x0.position(), cfg.obstacle_window);
    let ctx = CostContext { map, obstacles: &obstacles, reference: &reference, cfg };
    let mut gamma = memory.gamma.unwrap_or(cfg.linesearch.gamma_init);
    let settings = cfg.qp.settings();

    let mut current: Option<Trajectory> = None;
    let mut accepted_any = false;
    let mut fallback: Option<(f64, Trajectory)> = None;
    let mut iterations = Vec::new();
    for it in 0..cfg.qp_iterations.max(1) {
        let seed_controls = current.as_ref().map(|t| t.controls.clone()).or_else(|| previous.clone());
        let mut lib = generate_trajectory_library(
            &cfg.model,
            &cfg.limits,
            x0,
            &reference,
            seed_controls.as_deref(),
            cfg.dt,
            &cfg.library,
            cfg.seed.wrapping_add(it as u64),
        );
        let idx = choose_candidate(&mut lib, &ctx);
        for t in &lib {
            if t.feasible {
                let c = ctx.cost(&t.states, &t.controls);
                if fallback.as_ref().is_none_or(|(bc, _)| c < *bc) {
                    fallback = Some((c, t.clone()));
                }
            }
        }
        let candidate = lib.swap_remove(idx);
        let mut info = IterationInfo {
            candidate: candidate.label.clone(),
            qp_status: None,
            qp_iterations: 0,
            gamma,
            accepted: false,
        };
        if cfg.qp_iterations == 0 {
            current = Some(candidate);
            iterations.push(info);
            break;
        }
        let solved = build_qp(&candidate, &ctx, normals).ok().and_then(|qp| {
            let sol = solve_qp(&qp.problem, &settings, None).ok()?;
            info.qp_status = Some(sol.status);
            info.qp_iterations = sol.iterations;
            matches!(sol.status, QpStatus::Solved | QpStatus::MaxIterations)
                .then(|| qp.delta_controls(&cfg.model, &sol.x))
        });
        match solved {
            Some(du) => {
                let ls = linesearch(&candidate, &du, gamma, &ctx, &cfg.linesearch);
                gamma = ls.gamma_next;
                info.gamma = ls.gamma;
                info.accepted = ls.solved;
                accepted_any |= ls.solved;
                current = Some(ls.trajectory);
            }
            None => current = Some(candidate),
        }
        iterations.push(info);
    }

    let mut result = current.expect("at least one iteration");
    let (cost, violations) = ctx.evaluate(&mut result);
    let (trajectory, status, cost) = if (accepted_any || cfg.qp_iterations == 0) && violations == 0 {
        (result, MpcStatus::Optimized, cost)
    } else if let Some((c, t)) = fallback {
        (t, MpcStatus::LibraryFallback, c)
    } else {
        let stop = stopping_controls(&cfg.model, &cfg.limits, x0, horizon, cfg.dt);
        let mut t = Trajectory::from_controls(
            &cfg.model,
            &cfg.limits,
            x0,
            &stop,
            cfg.dt,
            TrajectorySource::Stopping,
            "emergency stop",
        );
        let (c, _) = ctx.evaluate(&mut t);
        (t, MpcStatus::Emergency, c)
    };
    MpcOutput {
        memory: MpcMemory { controls: Some(trajectory.controls.clone()), gamma: Some(gamma) },
        trajectory,
        status,
        cost,
        obstacles,
        iterations,
    }
}
