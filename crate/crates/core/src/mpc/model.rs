use serde::{Deserialize, Serialize};

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState6 {
    pub px: f64,
    pub py: f64,
    pub theta: f64,
    pub vx: f64,
    pub vy: f64,
    pub vtheta: f64,
}

impl RobotState6 {
    pub fn new(px: f64, py: f64, theta: f64) -> Self {
        Self {
            px,
            py,
            theta: wrap_angle(theta),
            ..Self::default()
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.px, self.py]
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.px, self.py, self.theta, self.vx, self.vy, self.vtheta]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            px: a[0],
            py: a[1],
            theta: wrap_angle(a[2]),
            vx: a[3],
            vy: a[4],
            vtheta: a[5],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// `[ax, ay, aθ]` for the 6-state model; `[ax, vθ, 0]` for differential drive.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput(pub [f64; 3]);

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// One Euler step of the 6-state model.
pub fn dynamics_step(x: &RobotState6, u: &ControlInput, dt: f64, kappa: f64) -> RobotState6 {
    let (s, c) = x.theta.sin_cos();
    RobotState6 {
        px: x.px + dt * (x.vx * c - x.vy * s),
        py: x.py + dt * (x.vx * s + x.vy * c),
        theta: wrap_angle(x.theta + dt * (kappa * x.vx + (1.0 - kappa) * x.vtheta)),
        vx: x.vx + dt * u.0[0],
        vy: x.vy + dt * u.0[1],
        vtheta: x.vtheta + dt * u.0[2],
    }
}

/// One Euler step of the differential-drive model `[px, py, θ, vx]` with
/// controls `[ax, vθ]`. The commanded yaw rate is stored in `vtheta`.
pub fn diff_drive_step(x: &RobotState6, u: &ControlInput, dt: f64, kappa: f64) -> RobotState6 {
    let (s, c) = x.theta.sin_cos();
    RobotState6 {
        px: x.px + dt * x.vx * c,
        py: x.py + dt * x.vx * s,
        theta: wrap_angle(x.theta + dt * (kappa * x.vx + (1.0 - kappa) * u.0[1])),
        vx: x.vx + dt * u.0[0],
        vy: 0.0,
        vtheta: u.0[1],
    }
}

/// Acceleration and velocity limits, indexed `[x, y, θ]`. For differential
/// drive `vel[2]` bounds the yaw-rate control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub accel: [f64; 3],
    pub vel: [f64; 3],
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            accel: [1.0, 1.0, 1.5],
            vel: [1.0, 0.5, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DynamicsModel {
    Omni { kappa: f64 },
    DiffDrive { kappa: f64 },
}

impl Default for DynamicsModel {
    fn default() -> Self {
        DynamicsModel::Omni { kappa: 0.5 }
    }
}

/// Row-major Jacobians `∂f/∂x` (nx × nx) and `∂f/∂u` (nx × nu).
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobians {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl DynamicsModel {
    pub fn nx(&self) -> usize {
        match self {
            DynamicsModel::Omni { .. } => 6,
            DynamicsModel::DiffDrive { .. } => 4,
        }
    }

    pub fn nu(&self) -> usize {
        match self {
            DynamicsModel::Omni { .. } => 3,
            DynamicsModel::DiffDrive { .. } => 2,
        }
    }

    pub fn kappa(&self) -> f64 {
        match *self {
            DynamicsModel::Omni { kappa } | DynamicsModel::DiffDrive { kappa } => kappa,
        }
    }

    pub fn step(&self, x: &RobotState6, u: &ControlInput, dt: f64) -> RobotState6 {
        match *self {
            DynamicsModel::Omni { kappa } => dynamics_step(x, u, dt, kappa),
            DynamicsModel::DiffDrive { kappa } => diff_drive_step(x, u, dt, kappa),
        }
    }

    pub fn state_vec(&self, x: &RobotState6) -> Vec<f64> {
        x.to_array()[..self.nx()].to_vec()
    }

    pub fn control_vec(&self, u: &ControlInput) -> Vec<f64> {
        u.0[..self.nu()].to_vec()
    }

    pub fn control_from(&self, v: &[f64]) -> ControlInput {
        let mut a = [0.0; 3];
        a[..self.nu()].copy_from_slice(&v[..self.nu()]);
        ControlInput(a)
    }

    /// Yaw rate produced by state and control.
    pub fn yaw_rate(&self, x: &RobotState6, u: &ControlInput) -> f64 {
        match *self {
            DynamicsModel::Omni { kappa } => kappa * x.vx + (1.0 - kappa) * x.vtheta,
            DynamicsModel::DiffDrive { kappa } => kappa * x.vx + (1.0 - kappa) * u.0[1],
        }
    }

    pub fn jacobians(&self, x: &RobotState6, _u: &ControlInput, dt: f64) -> Jacobians {
        let (s, c) = x.theta.sin_cos();
        let nx = self.nx();
        let nu = self.nu();
        let mut a = vec![0.0; nx * nx];
        let mut b = vec![0.0; nx * nu];
        for i in 0..nx {
            a[i * nx + i] = 1.0;
        }
        match *self {
            DynamicsModel::Omni { kappa } => {
                a[2] = dt * (-x.vx * s - x.vy * c);
                a[3] = dt * c;
                a[4] = -dt * s;
                a[nx + 2] = dt * (x.vx * c - x.vy * s);
                a[nx + 3] = dt * s;
                a[nx + 4] = dt * c;
                a[2 * nx + 3] = dt * kappa;
                a[2 * nx + 5] = dt * (1.0 - kappa);
                for k in 0..3 {
                    b[(3 + k) * nu + k] = dt;
                }
            }
            DynamicsModel::DiffDrive { kappa } => {
                a[2] = -dt * x.vx * s;
                a[3] = dt * c;
                a[nx + 2] = dt * x.vx * c;
                a[nx + 3] = dt * s;
                a[2 * nx + 3] = dt * kappa;
                b[2 * nu + 1] = dt * (1.0 - kappa);
                b[3 * nu] = dt;
            }
        }
        Jacobians { a, b }
    }

    /// Clamps a control so accelerations stay within limits and, where
    /// possible, the next velocities stay within the velocity limits.
    pub fn clamp_control(&self, x: &RobotState6, u: &ControlInput, limits: &Limits, dt: f64) -> ControlInput {
        let bound = |a: f64, v: f64, vmax: f64, amax: f64| {
            let lo = (-vmax - v) / dt;
            let hi = (vmax - v) / dt;
            a.max(lo).min(hi).clamp(-amax, amax)
        };
        match self {
            DynamicsModel::Omni { .. } => ControlInput([
                bound(u.0[0], x.vx, limits.vel[0], limits.accel[0]),
                bound(u.0[1], x.vy, limits.vel[1], limits.accel[1]),
                bound(u.0[2], x.vtheta, limits.vel[2], limits.accel[2]),
            ]),
            DynamicsModel::DiffDrive { .. } => ControlInput([
                bound(u.0[0], x.vx, limits.vel[0], limits.accel[0]),
                u.0[1].clamp(-limits.vel[2], limits.vel[2]),
                0.0,
            ]),
        }
    }

    /// Per-component control bounds `(lower, upper)` of length `nu`.
    pub fn control_bounds(&self, limits: &Limits) -> (Vec<f64>, Vec<f64>) {
        match self {
            DynamicsModel::Omni { .. } => (limits.accel.iter().map(|v| -v).collect(), limits.accel.to_vec()),
            DynamicsModel::DiffDrive { .. } => (
                vec![-limits.accel[0], -limits.vel[2]],
                vec![limits.accel[0], limits.vel[2]],
            ),
        }
    }
}

/// Rolls controls forward from `x0`, clamping each control first. Returns
/// the `T + 1` states and the clamped controls.
pub fn rollout(
    model: &DynamicsModel,
    limits: &Limits,
    x0: &RobotState6,
    controls: &[ControlInput],
    dt: f64,
) -> (Vec<RobotState6>, Vec<ControlInput>) {
    let mut states = Vec::with_capacity(controls.len() + 1);
    let mut used = Vec::with_capacity(controls.len());
    states.push(*x0);
    for u in controls {
        let x = *states.last().unwrap();
        let uc = model.clamp_control(&x, u, limits, dt);
        states.push(model.step(&x, &uc, dt));
        used.push(uc);
    }
    (states, used)
}
