use std::ops::Range;

use step_qp::{QpProblem, TripletMatrix};

use crate::error::{CoreError, Result};
use crate::riskmap::{CvarMap, NormalField};

use super::config::VelocityRiskMode;
use super::cost::CostContext;
use super::geometry::{signed_distance_full, signed_distance_gradient};
use super::library::Trajectory;
use super::model::{wrap_angle, ControlInput, DynamicsModel};
use super::orientation::orientation_and_gradient;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowGroup {
    Initial,
    Dynamics,
    ControlLimits,
    StateLimits,
    VelocityRisk,
    Orientation,
    StateBox,
    ControlBox,
    SignedDistance,
}

impl RowGroup {
    /// Rows that receive a slack variable when slacks are enabled.
    pub fn is_soft(self) -> bool {
        matches!(
            self,
            RowGroup::StateLimits | RowGroup::VelocityRisk | RowGroup::Orientation | RowGroup::SignedDistance
        )
    }
}

/// Variable layout `[δx₀ … δx_T, δu₀ … δu_{T−1}, slacks]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpLayout {
    pub nx: usize,
    pub nu: usize,
    pub horizon: usize,
    pub n_slack: usize,
    pub groups: Vec<(RowGroup, Range<usize>)>,
}

impl QpLayout {
    pub fn state_col(&self, k: usize, i: usize) -> usize {
        k * self.nx + i
    }

    pub fn control_col(&self, k: usize, i: usize) -> usize {
        (self.horizon + 1) * self.nx + k * self.nu + i
    }

    pub fn n_base(&self) -> usize {
        (self.horizon + 1) * self.nx + self.horizon * self.nu
    }

    pub fn rows(&self, group: RowGroup) -> Range<usize> {
        let mut out: Option<Range<usize>> = None;
        for (g, r) in &self.groups {
            if *g == group {
                out = Some(match out {
                    None => r.clone(),
                    Some(o) => o.start.min(r.start)..o.end.max(r.end),
                });
            }
        }
        out.unwrap_or(0..0)
    }

    pub fn row_count(&self, group: RowGroup) -> usize {
        self.groups.iter().filter(|(g, _)| *g == group).map(|(_, r)| r.len()).sum()
    }
}

#[derive(Debug, Clone)]
pub struct MpcQp {
    pub problem: QpProblem,
    pub layout: QpLayout,
}

impl MpcQp {
    pub fn delta_controls(&self, model: &DynamicsModel, x: &[f64]) -> Vec<ControlInput> {
        let l = &self.layout;
        (0..l.horizon)
            .map(|k| model.control_from(&x[l.control_col(k, 0)..l.control_col(k, 0) + l.nu]))
            .collect()
    }
}

#[derive(Default)]
struct Rows {
    coeffs: Vec<Vec<(usize, f64)>>,
    l: Vec<f64>,
    u: Vec<f64>,
    groups: Vec<(RowGroup, Range<usize>)>,
}

impl Rows {
    fn push(&mut self, group: RowGroup, coeffs: Vec<(usize, f64)>, l: f64, u: f64) {
        let r = self.coeffs.len();
        self.coeffs.push(coeffs);
        self.l.push(l);
        self.u.push(u);
        match self.groups.last_mut() {
            Some((g, range)) if *g == group && range.end == r => range.end = r + 1,
            _ => self.groups.push((group, r..r + 1)),
        }
    }
}

/// Speed bound `b` from the CVaR ρ at a step.
pub fn velocity_bound(mode: VelocityRiskMode, gamma: f64, rho: f64, vmax: f64) -> f64 {
    match mode {
        VelocityRiskMode::Proportional => (gamma * rho).max(0.0),
        VelocityRiskMode::Inverse => {
            if rho <= 1e-9 {
                vmax
            } else {
                (gamma / rho).min(vmax)
            }
        }
    }
}

/// Gradient and PSD-projected Hessian of the interpolated CVaR field by
/// central differences with step `h`.
pub fn cvar_derivatives(map: &CvarMap, x: f64, y: f64, h: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let f = |dx: f64, dy: f64| map.interpolate(x + dx, y + dy);
    let f0 = f(0.0, 0.0);
    let g = [(f(h, 0.0) - f(-h, 0.0)) / (2.0 * h), (f(0.0, h) - f(0.0, -h)) / (2.0 * h)];
    let hxx = (f(h, 0.0) - 2.0 * f0 + f(-h, 0.0)) / (h * h);
    let hyy = (f(0.0, h) - 2.0 * f0 + f(0.0, -h)) / (h * h);
    let hxy = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
    (g, project_psd([[hxx, hxy], [hxy, hyy]]))
}

/// Clamps the eigenvalues of a symmetric 2×2 matrix at zero.
pub fn project_psd(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let (a, b, c) = (m[0][0], m[0][1], m[1][1]);
    let mean = 0.5 * (a + c);
    let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (l1, l2) = (mean + r, mean - r);
    if l2 >= 0.0 {
        return m;
    }
    if l1 <= 0.0 {
        return [[0.0; 2]; 2];
    }
    // eigenvector of l1
    let v = if b.abs() > 1e-300 {
        let v = [l1 - c, b];
        let n = v[0].hypot(v[1]);
        [v[0] / n, v[1] / n]
    } else if a >= c {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    [[l1 * v[0] * v[0], l1 * v[0] * v[1]], [l1 * v[0] * v[1], l1 * v[1] * v[1]]]
}

/// Linearizes costs and constraints about `candidate` into a QP over the
/// deviations from it.
pub fn build_qp(candidate: &Trajectory, ctx: &CostContext, normals: Option<&NormalField>) -> Result<MpcQp> {
    let cfg = ctx.cfg;
    let model = &cfg.model;
    let (nx, nu) = (model.nx(), model.nu());
    let horizon = candidate.horizon();
    if candidate.states.len() != horizon + 1 || ctx.reference.len() != horizon + 1 {
        return Err(CoreError::Shape(format!(
            "candidate has {} states for {} controls, reference has {}",
            candidate.states.len(),
            horizon,
            ctx.reference.len()
        )));
    }
    let mut layout = QpLayout { nx, nu, horizon, n_slack: 0, groups: Vec::new() };
    let n_base = layout.n_base();
    let dt = candidate.dt;
    let states = &candidate.states;
    let controls = &candidate.controls;

    let mut p_diag = vec![0.0; n_base];
    let mut p_off: Vec<(usize, usize, f64)> = Vec::new();
    let mut q = vec![0.0; n_base];

    for k in 0..=horizon {
        let (a, r) = (states[k].to_array(), ctx.reference[k].to_array());
        for i in 0..nx {
            let w = cfg.tracking_weights[i];
            let d = if i == 2 { wrap_angle(a[i] - r[i]) } else { a[i] - r[i] };
            p_diag[layout.state_col(k, i)] += 2.0 * w;
            q[layout.state_col(k, i)] += 2.0 * w * d;
        }
    }
    let h = ctx.map.geometry().resolution;
    for k in 1..=horizon {
        let (g, hess) = cvar_derivatives(ctx.map, states[k].px, states[k].py, h);
        let (cx, cy) = (layout.state_col(k, 0), layout.state_col(k, 1));
        let w = cfg.risk_weight;
        q[cx] += w * g[0];
        q[cy] += w * g[1];
        p_diag[cx] += w * hess[0][0];
        p_diag[cy] += w * hess[1][1];
        p_off.push((cx, cy, w * hess[0][1]));
    }
    for k in 0..horizon {
        let uv = model.control_vec(&controls[k]);
        for i in 0..nu {
            let c = layout.control_col(k, i);
            p_diag[c] += 2.0 * (cfg.control_weight + cfg.control_change_weight);
            q[c] += 2.0 * cfg.control_weight * uv[i];
        }
    }

    let mut rows = Rows::default();
    let inf = f64::INFINITY;
    for i in 0..nx {
        rows.push(RowGroup::Initial, vec![(layout.state_col(0, i), 1.0)], 0.0, 0.0);
    }
    for k in 0..horizon {
        let jac = model.jacobians(&states[k], &controls[k], dt);
        let next = model.step(&states[k], &controls[k], dt).to_array();
        let cand = states[k + 1].to_array();
        for i in 0..nx {
            let mut c = vec![(layout.state_col(k + 1, i), 1.0)];
            for j in 0..nx {
                let a = jac.a[i * nx + j];
                if a != 0.0 {
                    c.push((layout.state_col(k, j), -a));
                }
            }
            for j in 0..nu {
                let b = jac.b[i * nu + j];
                if b != 0.0 {
                    c.push((layout.control_col(k, j), -b));
                }
            }
            let defect = if i == 2 { wrap_angle(next[i] - cand[i]) } else { next[i] - cand[i] };
            rows.push(RowGroup::Dynamics, c, defect, defect);
        }
    }
    let (ulo, uhi) = model.control_bounds(&cfg.limits);
    for k in 0..horizon {
        let uv = model.control_vec(&controls[k]);
        for i in 0..nu {
            rows.push(RowGroup::ControlLimits, vec![(layout.control_col(k, i), 1.0)], ulo[i] - uv[i], uhi[i] - uv[i]);
        }
    }
    let vel_rows: &[usize] = match model {
        DynamicsModel::Omni { .. } => &[3, 4, 5],
        DynamicsModel::DiffDrive { .. } => &[3],
    };
    for k in 1..=horizon {
        let a = states[k].to_array();
        for &i in vel_rows {
            let vmax = cfg.limits.vel[i - 3];
            rows.push(RowGroup::StateLimits, vec![(layout.state_col(k, i), 1.0)], -vmax - a[i], vmax - a[i]);
        }
    }
    for k in 1..=horizon {
        let x = &states[k];
        let rho = ctx.map.interpolate(x.px, x.py);
        let b = velocity_bound(cfg.velocity_risk, cfg.gamma_v, rho, cfg.limits.vel[0]);
        let bt = velocity_bound(cfg.velocity_risk, cfg.gamma_theta, rho, cfg.limits.vel[2]);
        match model {
            DynamicsModel::Omni { .. } => {
                let speed = x.speed();
                let d = if speed > 1e-9 { [x.vx / speed, x.vy / speed] } else { [1.0, 0.0] };
                rows.push(
                    RowGroup::VelocityRisk,
                    vec![(layout.state_col(k, 3), d[0]), (layout.state_col(k, 4), d[1])],
                    -b - speed,
                    b - speed,
                );
                rows.push(RowGroup::VelocityRisk, vec![(layout.state_col(k, 5), 1.0)], -bt - x.vtheta, bt - x.vtheta);
            }
            DynamicsModel::DiffDrive { .. } => {
                rows.push(RowGroup::VelocityRisk, vec![(layout.state_col(k, 3), 1.0)], -b - x.vx, b - x.vx);
                let w = controls[k - 1].0[1];
                rows.push(RowGroup::VelocityRisk, vec![(layout.control_col(k - 1, 1), 1.0)], -bt - w, bt - w);
            }
        }
    }
    for k in 1..=horizon {
        let x = &states[k];
        let o = normals.and_then(|n| orientation_and_gradient([x.px, x.py, x.theta], n).ok());
        for i in 0..2 {
            match &o {
                Some(o) => {
                    let c = (0..3).map(|j| (layout.state_col(k, j), o.grad[i][j])).collect();
                    rows.push(
                        RowGroup::Orientation,
                        c,
                        -cfg.omega_max[i] - o.omega[i],
                        cfg.omega_max[i] - o.omega[i],
                    );
                }
                None => rows.push(RowGroup::Orientation, Vec::new(), -inf, inf),
            }
        }
    }
    for k in 1..=horizon {
        for i in 0..nx {
            let e = cfg.state_box[i];
            rows.push(RowGroup::StateBox, vec![(layout.state_col(k, i), 1.0)], -e, e);
        }
    }
    for k in 0..horizon {
        for i in 0..nu {
            let e = cfg.control_box[i];
            rows.push(RowGroup::ControlBox, vec![(layout.control_col(k, i), 1.0)], -e, e);
        }
    }
    let reach = cfg.footprint.radius() + cfg.sd_activation;
    for k in 1..=horizon {
        let x = &states[k];
        let fp = cfg.footprint.polygon(x);
        for obs in ctx.obstacles {
            let (c, r) = obs.bounding_circle();
            if (c[0] - x.px).hypot(c[1] - x.py) - r > reach {
                continue;
            }
            let sd = signed_distance_full(&fp, obs);
            if sd.value >= cfg.sd_activation {
                continue;
            }
            let g = signed_distance_gradient(&sd, x);
            let coeffs = (0..3).map(|j| (layout.state_col(k, j), g[j])).collect();
            rows.push(RowGroup::SignedDistance, coeffs, cfg.sd_margin - sd.value, inf);
        }
    }

    let m = rows.coeffs.len();
    let soft: Vec<bool> = (0..m)
        .map(|r| cfg.use_slacks && rows.groups.iter().any(|(g, rg)| rg.contains(&r) && g.is_soft()))
        .collect();
    layout.n_slack = soft.iter().filter(|s| **s).count();
    layout.groups = rows.groups.clone();
    let n = n_base + layout.n_slack;

    let mut a = TripletMatrix::new(m, n);
    let mut s = n_base;
    for (r, coeffs) in rows.coeffs.iter().enumerate() {
        for &(c, v) in coeffs {
            a.push(r, c, v);
        }
        if soft[r] {
            a.push(r, s, 1.0);
            s += 1;
        }
    }
    let mut p = TripletMatrix::new(n, n);
    for (i, v) in p_diag.iter().enumerate() {
        p.push(i, i, *v);
    }
    for &(i, j, v) in &p_off {
        p.push(i, j, v);
        p.push(j, i, v);
    }
    for i in n_base..n {
        p.push(i, i, 2.0 * cfg.slack_weight);
    }
    q.resize(n, 0.0);
    if q.iter().any(|v| !v.is_finite()) || p_diag.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::NonFinite("QP cost".into()));
    }
    if rows.coeffs.iter().flatten().any(|(_, v)| !v.is_finite()) {
        return Err(CoreError::NonFinite("QP constraint matrix".into()));
    }
    let problem = QpProblem::new(p.to_csr(), q, a.to_csr(), rows.l, rows.u)?;
    Ok(MpcQp { problem, layout })
}
