use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::model::{rollout, wrap_angle, ControlInput, DynamicsModel, Limits, RobotState6};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySource {
    Previous,
    Stopping,
    GeoFollow,
    Heuristic,
    Random,
    Optimized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<RobotState6>,
    pub controls: Vec<ControlInput>,
    /// CVaR of the cell under each state; filled by cost evaluation.
    pub step_cvar: Vec<f64>,
    /// No lethal cell and no obstacle contact; filled by cost evaluation.
    pub feasible: bool,
    pub source: TrajectorySource,
    pub label: String,
}

impl Trajectory {
    /// Rolls `controls` out from `x0`; controls are clamped to the limits.
    pub fn from_controls(
        model: &DynamicsModel,
        limits: &Limits,
        x0: &RobotState6,
        controls: &[ControlInput],
        dt: f64,
        source: TrajectorySource,
        label: impl Into<String>,
    ) -> Self {
        let (states, controls) = rollout(model, limits, x0, controls, dt);
        let n = states.len();
        Self {
            dt,
            states,
            controls,
            step_cvar: vec![0.0; n],
            feasible: true,
            source,
            label: label.into(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.controls.len()
    }

    /// Largest deviation between stored and re-simulated states.
    pub fn rollout_defect(&self, model: &DynamicsModel) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.controls.len() {
            let next = model.step(&self.states[k], &self.controls[k], self.dt);
            let (a, b) = (next.to_array(), self.states[k + 1].to_array());
            for i in 0..6 {
                let d = if i == 2 { wrap_angle(a[i] - b[i]) } else { a[i] - b[i] };
                worst = worst.max(d.abs());
            }
        }
        worst
    }

    pub fn terminal(&self) -> &RobotState6 {
        self.states.last().expect("trajectory has states")
    }
}

/// Reference states along a polyline, advancing `v_ref·dt` per step from the
/// projection of `x0` and holding at the end of the path.
pub fn reference_trajectory(
    x0: &RobotState6,
    path: &[[f64; 2]],
    horizon: usize,
    dt: f64,
    v_ref: f64,
) -> Vec<RobotState6> {
    if path.len() < 2 {
        let goal = path.first().copied().unwrap_or(x0.position());
        let heading = if (goal[0] - x0.px).hypot(goal[1] - x0.py) > 1e-6 {
            (goal[1] - x0.py).atan2(goal[0] - x0.px)
        } else {
            x0.theta
        };
        return vec![RobotState6::new(goal[0], goal[1], heading); horizon + 1];
    }
    let mut cum = vec![0.0];
    for w in path.windows(2) {
        let l = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
        cum.push(cum.last().unwrap() + l);
    }
    let total = *cum.last().unwrap();
    let mut s0 = 0.0;
    let mut best = f64::INFINITY;
    for (i, w) in path.windows(2).enumerate() {
        let d = [w[1][0] - w[0][0], w[1][1] - w[0][1]];
        let l2 = d[0] * d[0] + d[1] * d[1];
        let t = if l2 > 0.0 {
            (((x0.px - w[0][0]) * d[0] + (x0.py - w[0][1]) * d[1]) / l2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let p = [w[0][0] + t * d[0], w[0][1] + t * d[1]];
        let e = (p[0] - x0.px).hypot(p[1] - x0.py);
        if e < best - 1e-12 {
            best = e;
            s0 = cum[i] + t * l2.sqrt();
        }
    }
    let at = |s: f64| -> ([f64; 2], f64) {
        let s = s.clamp(0.0, total);
        let mut i = cum.partition_point(|c| *c <= s).saturating_sub(1);
        while i + 1 < path.len() - 1 && cum[i + 1] - cum[i] <= 0.0 {
            i += 1;
        }
        let i = i.min(path.len() - 2);
        let l = cum[i + 1] - cum[i];
        let t = if l > 0.0 { ((s - cum[i]) / l).clamp(0.0, 1.0) } else { 0.0 };
        let (a, b) = (path[i], path[i + 1]);
        let mut heading = (b[1] - a[1]).atan2(b[0] - a[0]);
        if l <= 0.0 {
            heading = x0.theta;
        }
        ([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])], heading)
    };
    (0..=horizon)
        .map(|k| {
            let s = s0 + v_ref * dt * k as f64;
            let (p, heading) = at(s);
            let mut r = RobotState6::new(p[0], p[1], heading);
            r.vx = if s < total { v_ref } else { 0.0 };
            r
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LibraryConfig {
    /// Arc curvatures (1/m) of the heuristic members.
    pub curvatures: Vec<f64>,
    pub random_members: usize,
    /// Random control noise as a fraction of each acceleration limit.
    pub random_sigma: f64,
    /// Steps ahead on the reference that the follower steers towards.
    pub lookahead: usize,
    pub position_gain: f64,
    pub heading_gain: f64,
}

impl Default for LibraryConfig {
    fn default() -> Self {
        Self {
            curvatures: vec![-1.5, -0.5, 0.5, 1.5],
            random_members: 6,
            random_sigma: 0.4,
            lookahead: 3,
            position_gain: 1.0,
            heading_gain: 2.0,
        }
    }
}

/// Braking sequence driving every velocity towards zero as fast as the
/// acceleration limits allow.
pub fn stopping_controls(
    model: &DynamicsModel,
    limits: &Limits,
    x0: &RobotState6,
    horizon: usize,
    dt: f64,
) -> Vec<ControlInput> {
    let mut x = *x0;
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let u = match model {
            DynamicsModel::Omni { .. } => ControlInput([-x.vx / dt, -x.vy / dt, -x.vtheta / dt]),
            DynamicsModel::DiffDrive { .. } => ControlInput([-x.vx / dt, 0.0, 0.0]),
        };
        let u = model.clamp_control(&x, &u, limits, dt);
        x = model.step(&x, &u, dt);
        out.push(u);
    }
    out
}

/// Control that reaches the desired body velocities and yaw rate, before clamping.
fn velocity_command(model: &DynamicsModel, x: &RobotState6, v_des: [f64; 2], yaw_rate: f64, dt: f64) -> ControlInput {
    let kappa = model.kappa();
    match model {
        DynamicsModel::Omni { .. } => {
            let vt = if 1.0 - kappa > 1e-6 { (yaw_rate - kappa * x.vx) / (1.0 - kappa) } else { 0.0 };
            ControlInput([(v_des[0] - x.vx) / dt, (v_des[1] - x.vy) / dt, (vt - x.vtheta) / dt])
        }
        DynamicsModel::DiffDrive { .. } => {
            let vt = if 1.0 - kappa > 1e-6 { (yaw_rate - kappa * x.vx) / (1.0 - kappa) } else { 0.0 };
            ControlInput([(v_des[0] - x.vx) / dt, vt, 0.0])
        }
    }
}

/// Closed-loop tracking of the reference, used for the geo-follow member.
pub fn follow_controls(
    model: &DynamicsModel,
    limits: &Limits,
    x0: &RobotState6,
    reference: &[RobotState6],
    dt: f64,
    cfg: &LibraryConfig,
) -> Vec<ControlInput> {
    let horizon = reference.len().saturating_sub(1);
    let mut x = *x0;
    let mut out = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let target = reference[(k + cfg.lookahead).min(horizon)];
        let next = reference[k + 1];
        let dx = target.px - x.px;
        let dy = target.py - x.py;
        let dist = dx.hypot(dy);
        let (s, c) = x.theta.sin_cos();
        let (u, yaw_rate) = match model {
            DynamicsModel::Omni { .. } => {
                let gain = cfg.position_gain / (cfg.lookahead.max(1) as f64 * dt);
                let (rs, rc) = next.theta.sin_cos();
                let wx = next.vx * rc + gain * (next.px - x.px);
                let wy = next.vx * rs + gain * (next.py - x.py);
                let body = [c * wx + s * wy, -s * wx + c * wy];
                let yaw = cfg.heading_gain * wrap_angle(next.theta - x.theta);
                (body, yaw)
            }
            DynamicsModel::DiffDrive { .. } => {
                let e = if dist > 1e-3 { wrap_angle(dy.atan2(dx) - x.theta) } else { wrap_angle(next.theta - x.theta) };
                let reach = target.vx.max(dist / (cfg.lookahead.max(1) as f64 * dt));
                let v = reach.min(limits.vel[0]) * e.cos().max(0.0);
                ([v, 0.0], cfg.heading_gain * e)
            }
        };
        let cmd = velocity_command(model, &x, u, yaw_rate, dt);
        let cmd = model.clamp_control(&x, &cmd, limits, dt);
        x = model.step(&x, &cmd, dt);
        out.push(cmd);
    }
    out
}

fn arc_controls(
    model: &DynamicsModel,
    limits: &Limits,
    x0: &RobotState6,
    horizon: usize,
    dt: f64,
    mut phase: impl FnMut(usize) -> (f64, f64),
) -> Vec<ControlInput> {
    let mut x = *x0;
    let mut out = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let (v, yaw) = phase(k);
        let cmd = velocity_command(model, &x, [v, 0.0], yaw, dt);
        let cmd = model.clamp_control(&x, &cmd, limits, dt);
        x = model.step(&x, &cmd, dt);
        out.push(cmd);
    }
    out
}

/// Shifts a previous control sequence one step forward, repeating the last
/// control, and pads or truncates to `horizon`.
pub fn shift_controls(previous: &[ControlInput], horizon: usize) -> Vec<ControlInput> {
    let mut out: Vec<ControlInput> = previous.iter().skip(1).copied().collect();
    let last = previous.last().copied().unwrap_or_default();
    out.resize(horizon, last);
    out
}

/// Builds the candidate library: the previous solution, the stopping
/// sequence, a reference follower, arcs, v-turns and u-turns, and random
/// perturbations of the follower.
#[allow(clippy::too_many_arguments)]
pub fn generate_trajectory_library(
    model: &DynamicsModel,
    limits: &Limits,
    x0: &RobotState6,
    reference: &[RobotState6],
    previous: Option<&[ControlInput]>,
    dt: f64,
    cfg: &LibraryConfig,
    seed: u64,
) -> Vec<Trajectory> {
    let horizon = reference.len().saturating_sub(1);
    let mk = |controls: &[ControlInput], source, label: String| {
        Trajectory::from_controls(model, limits, x0, controls, dt, source, label)
    };
    let mut lib = Vec::new();
    let prev = match previous {
        Some(p) if !p.is_empty() => {
            let mut p = p.to_vec();
            p.resize(horizon, *p.last().unwrap());
            p
        }
        _ => vec![ControlInput::default(); horizon],
    };
    lib.push(mk(&prev, TrajectorySource::Previous, "previous".into()));
    lib.push(mk(
        &stopping_controls(model, limits, x0, horizon, dt),
        TrajectorySource::Stopping,
        "stopping".into(),
    ));
    let follow = follow_controls(model, limits, x0, reference, dt, cfg);
    lib.push(mk(&follow, TrajectorySource::GeoFollow, "geo-follow".into()));

    let vmax = limits.vel[0];
    let cruise = x0.vx.abs().max(0.5 * vmax).min(vmax);
    let wmax = limits.vel[2];
    for &curv in &cfg.curvatures {
        let c = arc_controls(model, limits, x0, horizon, dt, |_| (cruise, (curv * cruise).clamp(-wmax, wmax)));
        lib.push(mk(&c, TrajectorySource::Heuristic, format!("arc {curv:+.2}")));
    }
    for side in [1.0, -1.0] {
        let half = horizon / 2;
        let c = arc_controls(model, limits, x0, horizon, dt, |k| {
            if k < half {
                (0.0, side * wmax)
            } else {
                (cruise, 0.0)
            }
        });
        let name = if side > 0.0 { "v-turn left" } else { "v-turn right" };
        lib.push(mk(&c, TrajectorySource::Heuristic, name.into()));
        let c = arc_controls(model, limits, x0, horizon, dt, |_| (0.3 * vmax, side * wmax));
        let name = if side > 0.0 { "u-turn left" } else { "u-turn right" };
        lib.push(mk(&c, TrajectorySource::Heuristic, name.into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let nu = model.nu();
    let (lo, hi) = model.control_bounds(limits);
    for r in 0..cfg.random_members {
        let noisy: Vec<ControlInput> = follow
            .iter()
            .map(|u| {
                let mut v = model.control_vec(u);
                for i in 0..nu {
                    v[i] += cfg.random_sigma * hi[i].max(-lo[i]) * unit.sample(&mut rng);
                }
                model.control_from(&v)
            })
            .collect();
        lib.push(mk(&noisy, TrajectorySource::Random, format!("random {r}")));
    }
    lib
}
