use step_core::grid::GridGeometry;
use step_core::mpc::{
    build_qp, choose_candidate, follow_controls, generate_trajectory_library, linesearch, plan_mpc,
    reference_trajectory, signed_distance, ControlInput, CostContext, DynamicsModel, Footprint, MpcConfig,
    MpcMemory, MpcStatus, RobotState6, RowGroup, Trajectory, TrajectorySource, VelocityRiskMode,
};
use step_core::planner::{plan_astar, AstarConfig};
use step_core::riskmap::{CellRisk, CvarMap};
use step_qp::{solve_qp, AdmmSettings};

fn map_from(width: usize, height: usize, res: f64, f: impl Fn([f64; 2]) -> (f64, f64)) -> CvarMap {
    let g = GridGeometry::new([0.0, 0.0], res, width, height).unwrap();
    let cells: Vec<CellRisk> = (0..g.len())
        .map(|i| {
            let (ix, iy) = g.cell_of_index(i);
            let (mu, sigma) = f(g.center(ix, iy));
            CellRisk { mu, sigma }
        })
        .collect();
    CvarMap::from_cells(g, &cells, 0.9, 0.5).unwrap()
}

fn free_map() -> CvarMap {
    map_from(80, 60, 0.1, |_| (0.0, 0.0))
}

fn library(cfg: &MpcConfig, x0: &RobotState6, path: &[[f64; 2]], seed: u64) -> (Vec<RobotState6>, Vec<Trajectory>) {
    let reference = reference_trajectory(x0, path, cfg.horizon, cfg.dt, cfg.v_ref);
    let lib = generate_trajectory_library(&cfg.model, &cfg.limits, x0, &reference, None, cfg.dt, &cfg.library, seed);
    (reference, lib)
}

#[test]
fn library_spans_every_source_and_rolls_out_consistently() {
    let cfg = MpcConfig::default();
    for model in [DynamicsModel::Omni { kappa: 0.5 }, DynamicsModel::DiffDrive { kappa: 0.0 }] {
        let cfg = MpcConfig { model, ..cfg.clone() };
        let x0 = RobotState6 { px: 2.0, py: 3.0, theta: 0.3, vx: 0.4, ..RobotState6::default() };
        let (_, lib) = library(&cfg, &x0, &[[2.0, 3.0], [6.0, 3.5]], 7);
        assert!(lib.len() >= 5);
        for src in [
            TrajectorySource::Previous,
            TrajectorySource::Stopping,
            TrajectorySource::GeoFollow,
            TrajectorySource::Heuristic,
            TrajectorySource::Random,
        ] {
            assert!(lib.iter().any(|t| t.source == src), "{src:?} missing");
        }
        for t in &lib {
            assert_eq!(t.states.len(), cfg.horizon + 1);
            assert!(t.rollout_defect(&cfg.model) <= 1e-9, "{}", t.label);
            for u in &t.controls {
                let (lo, hi) = cfg.model.control_bounds(&cfg.limits);
                for (i, v) in cfg.model.control_vec(u).iter().enumerate() {
                    assert!(*v >= lo[i] - 1e-12 && *v <= hi[i] + 1e-12);
                }
            }
        }
        let (_, again) = library(&cfg, &x0, &[[2.0, 3.0], [6.0, 3.5]], 7);
        assert_eq!(lib, again);
    }
}

#[test]
fn stopping_member_examples() {
    let cfg = MpcConfig::default();
    let (_, lib) = library(&cfg, &RobotState6::new(1.0, 1.0, 0.0), &[[1.0, 1.0], [5.0, 1.0]], 0);
    let stop = lib.iter().find(|t| t.source == TrajectorySource::Stopping).unwrap();
    assert!(stop.controls.iter().all(|u| u.0 == [0.0; 3]));

    let x0 = RobotState6 { px: 1.0, py: 1.0, vx: 0.95, vy: -0.3, vtheta: 0.7, ..RobotState6::default() };
    let (_, lib) = library(&cfg, &x0, &[[1.0, 1.0], [5.0, 1.0]], 0);
    let stop = lib.iter().find(|t| t.source == TrajectorySource::Stopping).unwrap();
    let end = stop.terminal();
    assert!(end.speed() <= cfg.dt * cfg.limits.accel[0]);
    assert_eq!((end.vx, end.vy, end.vtheta), (0.0, 0.0, 0.0));
}

#[test]
fn geo_follow_wins_on_a_free_map() {
    let cfg = MpcConfig::default();
    let map = free_map();
    for model in [DynamicsModel::Omni { kappa: 0.5 }, DynamicsModel::DiffDrive { kappa: 0.0 }] {
        let cfg = MpcConfig { model, ..cfg.clone() };
        let x0 = RobotState6::new(1.0, 3.0, 0.0);
        let (reference, mut lib) = library(&cfg, &x0, &[[1.0, 3.0], [7.0, 3.0]], 1);
        let ctx = CostContext { map: &map, obstacles: &[], reference: &reference, cfg: &cfg };
        let i = choose_candidate(&mut lib, &ctx);
        assert_eq!(lib[i].source, TrajectorySource::GeoFollow, "{model:?} chose {}", lib[i].label);
    }
}

#[test]
fn only_u_turns_survive_a_wall_ahead() {
    let cfg = MpcConfig {
        model: DynamicsModel::DiffDrive { kappa: 0.0 },
        footprint: Footprint { length: 0.002, width: 0.002 },
        ..MpcConfig::default()
    };
    let x0 = RobotState6 { px: 2.0, py: 2.0, vx: 1.0, ..RobotState6::default() };
    let path = [[2.0, 2.0], [0.0, 2.0]];
    let (reference, lib) = library(&cfg, &x0, &path, 3);
    let res = 0.01;
    let g = GridGeometry::new([0.0, 0.0], res, 500, 400).unwrap();
    let cell = |x: &RobotState6| g.cell_at(x.px, x.py).unwrap();
    let is_u = |t: &Trajectory| t.label.starts_with("u-turn");
    let safe: std::collections::HashSet<_> =
        lib.iter().filter(|t| is_u(t)).flat_map(|t| t.states[1..].iter().map(cell)).collect();
    let lethal: std::collections::HashSet<_> = lib
        .iter()
        .filter(|t| !is_u(t))
        .flat_map(|t| t.states[1..].iter().map(cell))
        .filter(|c| !safe.contains(c))
        .collect();
    let map = map_from(500, 400, res, |p| {
        let c = g.cell_at(p[0], p[1]).unwrap();
        if lethal.contains(&c) { (1.0, 0.0) } else { (0.0, 0.0) }
    });
    let ctx = CostContext { map: &map, obstacles: &[], reference: &reference, cfg: &cfg };
    let mut lib = lib;
    let chosen = choose_candidate(&mut lib, &ctx);
    // exhaustive check: every other member violates, and the pick is the cheapest u-turn
    let mut best = (f64::INFINITY, usize::MAX);
    for (i, t) in lib.iter().enumerate() {
        let v = ctx.violations(&t.states);
        assert_eq!(v == 0, is_u(t), "{} has {v} violations", t.label);
        let c = ctx.cost(&t.states, &t.controls);
        if v == 0 && c < best.0 {
            best = (c, i);
        }
    }
    assert_eq!(chosen, best.1);
    assert!(is_u(&lib[chosen]));
}

#[test]
fn all_lethal_map_falls_back_to_stopping() {
    let cfg = MpcConfig::default();
    let map = map_from(80, 60, 0.1, |_| (1.0, 0.0));
    let x0 = RobotState6 { px: 3.0, py: 3.0, vx: 0.5, ..RobotState6::default() };
    let (reference, mut lib) = library(&cfg, &x0, &[[3.0, 3.0], [6.0, 3.0]], 0);
    let ctx = CostContext { map: &map, obstacles: &[], reference: &reference, cfg: &cfg };
    let i = choose_candidate(&mut lib, &ctx);
    assert_eq!(lib[i].source, TrajectorySource::Stopping);
}

fn stationary(cfg: &MpcConfig, x0: RobotState6) -> Trajectory {
    let controls = vec![ControlInput::default(); cfg.horizon];
    Trajectory::from_controls(&cfg.model, &cfg.limits, &x0, &controls, cfg.dt, TrajectorySource::Previous, "hold")
}

#[test]
fn qp_row_count_for_two_active_obstacles() {
    let cfg = MpcConfig { horizon: 10, ..MpcConfig::default() };
    let map = free_map();
    let x0 = RobotState6::new(4.0, 3.0, 0.0);
    let cand = stationary(&cfg, x0);
    let obstacles = [
        step_core::mpc::ConvexPolygon::rectangle([5.2, 3.0], [0.2, 0.2], 0.0).unwrap(),
        step_core::mpc::ConvexPolygon::rectangle([4.0, 4.1], [0.2, 0.2], 0.0).unwrap(),
    ];
    let reference = cand.states.clone();
    let ctx = CostContext { map: &map, obstacles: &obstacles, reference: &reference, cfg: &cfg };
    let qp = build_qp(&cand, &ctx, None).unwrap();
    let (t, nx, nu) = (10, 6, 3);
    // initial + dynamics, control limits, per-step velocity limits (3),
    // velocity-risk (2), orientation (2), state box (nx), control box (nu),
    // and one row per (step, obstacle) pair within reach
    let expected = (t + 1) * nx + t * nu + t * 3 + t * 2 + t * 2 + t * nx + t * nu + t * 2;
    assert_eq!(expected, 276);
    assert_eq!(qp.problem.num_constraints(), expected);
    assert_eq!(qp.layout.row_count(RowGroup::SignedDistance), 20);
    assert_eq!(qp.layout.n_slack, t * 3 + t * 2 + t * 2 + t * 2);
    assert_eq!(qp.problem.num_vars(), (t + 1) * nx + t * nu + qp.layout.n_slack);
}

#[test]
fn velocity_risk_row_encodes_proportional_bound() {
    let cfg = MpcConfig {
        horizon: 5,
        velocity_risk: VelocityRiskMode::Proportional,
        gamma_v: 5.0,
        use_slacks: false,
        ..MpcConfig::default()
    };
    let map = map_from(80, 60, 0.1, |_| (0.2, 0.0));
    let cand = stationary(&cfg, RobotState6::new(4.0, 3.0, 0.0));
    let reference = cand.states.clone();
    let ctx = CostContext { map: &map, obstacles: &[], reference: &reference, cfg: &cfg };
    let qp = build_qp(&cand, &ctx, None).unwrap();
    let rows = qp.layout.rows(RowGroup::VelocityRisk);
    let first = rows.start;
    assert!((qp.problem.u[first] - 1.0).abs() < 1e-12, "{}", qp.problem.u[first]);
    assert!((qp.problem.l[first] + 1.0).abs() < 1e-12);
}

#[test]
fn candidate_equal_to_reference_is_a_qp_fixed_point() {
    let cfg = MpcConfig::default();
    let map = free_map();
    let x0 = RobotState6 { px: 1.0, py: 3.0, vx: 0.5, ..RobotState6::default() };
    let cand = stationary(&cfg, x0);
    let reference = cand.states.clone();
    let ctx = CostContext { map: &map, obstacles: &[], reference: &reference, cfg: &cfg };
    let qp = build_qp(&cand, &ctx, None).unwrap();
    assert!(qp.problem.q.iter().all(|v| *v == 0.0));
    let sol = solve_qp(&qp.problem, &AdmmSettings::default().with_tolerances(1e-9, 0.0), None).unwrap();
    assert!(sol.is_solved());
    assert!(sol.x.iter().all(|v| v.abs() < 1e-6), "{:?}", sol.x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
}

#[test]
fn hard_rows_hold_without_slacks() {
    let cfg = MpcConfig { use_slacks: false, ..MpcConfig::default() };
    let map = map_from(80, 60, 0.1, |p| {
        if (p[0] - 5.0).abs() < 0.5 && (p[1] - 3.6).abs() < 0.5 {
            (1.0, 0.0)
        } else {
            (0.05 * p[1], 0.02)
        }
    });
    let x0 = RobotState6 { px: 1.5, py: 2.5, vx: 0.5, ..RobotState6::default() };
    let path = [[1.5, 2.5], [7.5, 2.5]];
    let reference = reference_trajectory(&x0, &path, cfg.horizon, cfg.dt, cfg.v_ref);
    let controls = follow_controls(&cfg.model, &cfg.limits, &x0, &reference, cfg.dt, &cfg.library);
    let cand = Trajectory::from_controls(&cfg.model, &cfg.limits, &x0, &controls, cfg.dt, TrajectorySource::GeoFollow, "f");
    let obstacles = step_core::mpc::obstacles_near(&map, x0.position(), cfg.obstacle_window);
    assert!(!obstacles.is_empty());
    let ctx = CostContext { map: &map, obstacles: &obstacles, reference: &reference, cfg: &cfg };
    assert_eq!(ctx.violations(&cand.states), 0);
    let qp = build_qp(&cand, &ctx, None).unwrap();
    assert_eq!(qp.layout.n_slack, 0);
    let sol = solve_qp(&qp.problem, &AdmmSettings::default().with_tolerances(1e-9, 0.0).with_max_iter(100_000), None).unwrap();
    assert!(sol.is_solved(), "{:?}", sol.status);
    let ax = qp.problem.a.mul_vec(&sol.x);
    for (i, v) in ax.iter().enumerate() {
        assert!(*v >= qp.problem.l[i] - 1e-6 && *v <= qp.problem.u[i] + 1e-6, "row {i}: {} ≤ {v} ≤ {}", qp.problem.l[i], qp.problem.u[i]);
    }
}

#[test]
fn linesearch_examples() {
    let cfg = MpcConfig::default();
    let map = free_map();
    let x0 = RobotState6::new(1.0, 3.0, 0.0);
    let path = [[1.0, 3.0], [7.0, 3.0]];
    let reference = reference_trajectory(&x0, &path, cfg.horizon, cfg.dt, cfg.v_ref);
    let ctx = CostContext { map: &map, obstacles: &[], reference: &reference, cfg: &cfg };
    let cand = stationary(&cfg, x0);
    let c0 = ctx.cost(&cand.states, &cand.controls);

    let zero = vec![ControlInput::default(); cfg.horizon];
    let r = linesearch(&cand, &zero, 1.0, &ctx, &cfg.linesearch);
    assert!(r.solved);
    assert_eq!(r.trials, 1);
    assert_eq!(r.cost, c0);

    // full step onto the follower strictly lowers the tracking cost
    let follow = follow_controls(&cfg.model, &cfg.limits, &x0, &reference, cfg.dt, &cfg.library);
    let du: Vec<ControlInput> = follow.iter().zip(&cand.controls).map(|(f, c)| ControlInput([0, 1, 2].map(|i| f.0[i] - c.0[i]))).collect();
    let r = linesearch(&cand, &du, 1.0, &ctx, &cfg.linesearch);
    assert!(r.solved && r.gamma >= cfg.linesearch.gamma_min);
    assert!(r.cost < c0);

    // wall 0.6 m ahead: any forward push collides
    let walled = map_from(80, 60, 0.1, |p| if p[0] > 2.1 { (1.0, 0.0) } else { (0.0, 0.0) });
    let obstacles = step_core::mpc::obstacles_near(&walled, x0.position(), cfg.obstacle_window);
    let ctx = CostContext { map: &walled, obstacles: &obstacles, reference: &reference, cfg: &cfg };
    assert_eq!(ctx.violations(&cand.states), 0);
    let push = vec![ControlInput([16.0, 0.0, 0.0]); cfg.horizon];
    let r = linesearch(&cand, &push, 1.0, &ctx, &cfg.linesearch);
    assert!(!r.solved);
    assert_eq!(r.gamma, cfg.linesearch.gamma_min);
    assert_eq!(r.trajectory.controls, cand.controls);
}

fn closed_loop(
    map: &CvarMap,
    cfg: &MpcConfig,
    mut x: RobotState6,
    path: &[[f64; 2]],
    steps: usize,
    mut per_step: impl FnMut(&RobotState6, &step_core::mpc::MpcOutput),
) -> RobotState6 {
    let mut memory = MpcMemory::default();
    for _ in 0..steps {
        let out = plan_mpc(&x, &memory, path, map, None, cfg);
        per_step(&x, &out);
        assert!(out.trajectory.rollout_defect(&cfg.model) <= 1e-9);
        x = out.trajectory.states[1];
        memory = out.memory;
    }
    x
}

#[test]
fn tracks_a_straight_corridor() {
    let map = map_from(130, 40, 0.1, |p| if p[1] < 0.5 || p[1] > 3.5 { (1.0, 0.0) } else { (0.0, 0.0) });
    for model in [DynamicsModel::Omni { kappa: 0.5 }, DynamicsModel::DiffDrive { kappa: 0.0 }] {
        let cfg = MpcConfig { model, ..MpcConfig::default() };
        let path = [[1.0, 2.0], [11.0, 2.0]];
        let mut worst: f64 = 0.0;
        let end = closed_loop(&map, &cfg, RobotState6::new(1.0, 2.0, 0.0), &path, 180, |x, out| {
            worst = worst.max((x.py - 2.0).abs());
            assert_ne!(out.status, MpcStatus::Emergency);
        });
        assert!(worst < 0.1, "{model:?} cross-track error {worst}");
        assert!((end.px - 11.0).abs() < 0.1 && (end.py - 2.0).abs() < 0.1, "{model:?} ended at {end:?}");
    }
}

#[test]
fn avoids_a_lethal_block() {
    let block = |p: [f64; 2]| (p[0] - 6.0).abs() < 0.5 && (p[1] - 2.0).abs() < 0.5;
    let map = map_from(130, 40, 0.1, |p| {
        if p[1] < 0.3 || p[1] > 3.7 || block(p) { (1.0, 0.0) } else { (0.0, 0.0) }
    });
    let astar = AstarConfig { clearance_radius: 0.8, clearance_cost: 0.5, ..AstarConfig::default() };
    let path = plan_astar(&map, [1.0, 2.0], [11.0, 2.0], &astar).unwrap().waypoints;
    for model in [DynamicsModel::Omni { kappa: 0.5 }, DynamicsModel::DiffDrive { kappa: 0.0 }] {
        let cfg = MpcConfig { model, ..MpcConfig::default() };
        let mut min_sd = f64::INFINITY;
        let end = closed_loop(&map, &cfg, RobotState6::new(1.0, 2.0, 0.0), &path, 220, |_, out| {
            for s in &out.trajectory.states {
                let fp = cfg.footprint.polygon(s);
                for o in &out.obstacles {
                    min_sd = min_sd.min(signed_distance(&fp, o));
                }
            }
        });
        assert!(min_sd > 0.0, "{model:?} min signed distance {min_sd}");
        assert!(end.px > 9.0, "{model:?} ended at {end:?}");
    }
}

#[test]
fn blocked_surroundings_trigger_an_emergency_stop() {
    let cfg = MpcConfig::default();
    let map = map_from(80, 40, 0.1, |p| if p[0] > 3.0 { (1.0, 0.0) } else { (0.0, 0.0) });
    let x0 = RobotState6 { px: 2.3, py: 2.0, vx: 1.0, ..RobotState6::default() };
    let out = plan_mpc(&x0, &MpcMemory::default(), &[[2.3, 2.0], [7.0, 2.0]], &map, None, &cfg);
    assert_eq!(out.status, MpcStatus::Emergency);
    assert!(out.trajectory.terminal().speed() <= cfg.dt * cfg.limits.accel[0]);

    let lethal = map_from(80, 40, 0.1, |_| (1.0, 0.0));
    let out = plan_mpc(&RobotState6::new(4.0, 2.0, 0.0), &MpcMemory::default(), &[[4.0, 2.0]], &lethal, None, &cfg);
    assert_eq!(out.status, MpcStatus::Emergency);
    assert!(out.trajectory.terminal().speed() <= cfg.dt * cfg.limits.accel[0]);
}

#[test]
fn planning_is_deterministic() {
    let cfg = MpcConfig::default();
    let map = map_from(80, 40, 0.1, |p| (0.05 * (p[0] * 1.3).sin().abs(), 0.05));
    let x0 = RobotState6 { px: 1.0, py: 2.0, vx: 0.3, ..RobotState6::default() };
    let a = plan_mpc(&x0, &MpcMemory::default(), &[[1.0, 2.0], [6.0, 3.0]], &map, None, &cfg);
    let b = plan_mpc(&x0, &MpcMemory::default(), &[[1.0, 2.0], [6.0, 3.0]], &map, None, &cfg);
    assert_eq!(a.trajectory, b.trajectory);
    assert_eq!(a.status, b.status);
}
