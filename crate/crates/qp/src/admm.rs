//! Operator-splitting (ADMM) iteration for `min ½xᵀPx + qᵀx  s.t.  l ≤ Ax ≤ u`.
//!
//! Splitting `z = Ax` turns each iteration into one linear solve with the fixed
//! matrix `P + σI + AᵀRA` (factored once), a projection onto `[l, u]`, and a
//! dual update. Problem data is equilibrated with Ruiz scaling first.

use crate::csr::{CsrMatrix, TripletMatrix};
use crate::factor::EnvelopeCholesky;
use crate::problem::{dot, QpProblem};
use crate::QpError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmSettings {
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation parameter in (0, 2).
    pub alpha: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_prim_inf: f64,
    pub eps_dual_inf: f64,
    pub max_iter: usize,
    pub scaling_iters: usize,
    /// Termination residuals are evaluated every this many iterations.
    pub check_interval: usize,
    /// Infeasibility certificates are evaluated every this many iterations.
    pub infeasibility_interval: usize,
    /// Rebalances ρ from the residual ratio and refactors when it moves by
    /// more than `adaptive_rho_tolerance`.
    pub adaptive_rho: bool,
    pub adaptive_rho_interval: usize,
    pub adaptive_rho_tolerance: f64,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            eps_abs: 1e-4,
            eps_rel: 1e-4,
            eps_prim_inf: 1e-5,
            eps_dual_inf: 1e-5,
            max_iter: 4000,
            scaling_iters: 10,
            check_interval: 5,
            infeasibility_interval: 25,
            adaptive_rho: false,
            adaptive_rho_interval: 25,
            adaptive_rho_tolerance: 5.0,
        }
    }
}

impl AdmmSettings {
    pub fn with_tolerances(mut self, eps_abs: f64, eps_rel: f64) -> Self {
        self.eps_abs = eps_abs;
        self.eps_rel = eps_rel;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_adaptive_rho(mut self, on: bool) -> Self {
        self.adaptive_rho = on;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    MaxIterations,
    PrimalInfeasible,
    DualInfeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    /// Normalized `δy` (primal infeasibility) or `δx` (dual infeasibility).
    pub certificate: Option<Vec<f64>>,
}

impl QpSolution {
    pub fn is_solved(&self) -> bool {
        self.status == QpStatus::Solved
    }
}

/// Optional primal/dual starting point in the original (unscaled) problem space.
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    pub x: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
}

struct Scaled {
    p: CsrMatrix,
    a: CsrMatrix,
    q: Vec<f64>,
    l: Vec<f64>,
    u: Vec<f64>,
    d: Vec<f64>,
    e: Vec<f64>,
    c: f64,
}

const SCALE_MIN: f64 = 1e-4;
const SCALE_MAX: f64 = 1e4;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_FACTOR: f64 = 1e3;

fn row_rhos(s: &Scaled, rho: f64) -> Vec<f64> {
    (0..s.l.len())
        .map(|i| {
            let (l, u) = (s.l[i], s.u[i]);
            if l == f64::NEG_INFINITY && u == f64::INFINITY {
                RHO_MIN
            } else if (u - l).abs() < 1e-12 * l.abs().max(1.0) {
                RHO_EQ_FACTOR * rho
            } else {
                rho
            }
        })
        .collect()
}

fn factor_kkt(s: &Scaled, rho: &[f64], sigma: f64) -> Result<EnvelopeCholesky, QpError> {
    let n = s.q.len();
    let mut kt = TripletMatrix::new(n, n);
    for (r, c, v) in s.p.triplets() {
        kt.push(r, c, v);
    }
    for i in 0..n {
        kt.push(i, i, sigma);
    }
    for (i, &ri) in rho.iter().enumerate() {
        let row: Vec<(usize, f64)> = s.a.row(i).collect();
        for &(j, aj) in &row {
            for &(k, ak) in &row {
                kt.push(j, k, ri * aj * ak);
            }
        }
    }
    EnvelopeCholesky::factor(&kt.to_csr())
}

fn ruiz(prob: &QpProblem, iters: usize) -> Scaled {
    let n = prob.num_vars();
    let m = prob.num_constraints();
    let mut p = prob.p.clone();
    let mut a = prob.a.clone();
    let mut q = prob.q.clone();
    let mut d = vec![1.0; n];
    let mut e = vec![1.0; m];
    let mut c = 1.0;

    let safe = |norm: f64| {
        if norm < SCALE_MIN {
            1.0
        } else {
            (1.0 / norm.sqrt()).clamp(SCALE_MIN, SCALE_MAX)
        }
    };

    for _ in 0..iters {
        let pc = p.col_inf_norms();
        let ac = a.col_inf_norms();
        let dd: Vec<f64> = pc.iter().zip(&ac).map(|(x, y)| safe(x.max(*y))).collect();
        let de: Vec<f64> = a.row_inf_norms().into_iter().map(safe).collect();
        p.scale(&dd, &dd);
        a.scale(&de, &dd);
        q.iter_mut().zip(&dd).for_each(|(qi, s)| *qi *= s);
        d.iter_mut().zip(&dd).for_each(|(di, s)| *di *= s);
        e.iter_mut().zip(&de).for_each(|(ei, s)| *ei *= s);

        let pc = p.col_inf_norms();
        let mean = if n > 0 { pc.iter().sum::<f64>() / n as f64 } else { 0.0 };
        let qn = q.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let gamma = safe(mean.max(qn).powi(2));
        p.scale_all(gamma);
        q.iter_mut().for_each(|v| *v *= gamma);
        c *= gamma;
    }
    let l = prob.l.iter().zip(&e).map(|(v, s)| v * s).collect();
    let u = prob.u.iter().zip(&e).map(|(v, s)| v * s).collect();
    Scaled {
        p,
        a,
        q,
        l,
        u,
        d,
        e,
        c,
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn scaled_inf_norm(v: &[f64], s: &[f64]) -> f64 {
    v.iter()
        .zip(s)
        .fold(0.0f64, |m, (x, si)| m.max((x * si).abs()))
}

/// Solves a convex QP. Errors are reserved for malformed problems or a failed
/// factorization; non-convergence is reported through [`QpStatus`].
pub fn solve_qp(
    prob: &QpProblem,
    settings: &AdmmSettings,
    warm: Option<&WarmStart>,
) -> Result<QpSolution, QpError> {
    prob.validate()?;
    let n = prob.num_vars();
    let m = prob.num_constraints();
    let s = ruiz(prob, settings.scaling_iters);
    let dinv: Vec<f64> = s.d.iter().map(|v| 1.0 / v).collect();
    let einv: Vec<f64> = s.e.iter().map(|v| 1.0 / v).collect();

    let mut rho_base = settings.rho;
    let mut rho = row_rhos(&s, rho_base);
    let mut kkt = factor_kkt(&s, &rho, settings.sigma)?;

    let mut x = vec![0.0; n];
    let mut z = vec![0.0; m];
    let mut y = vec![0.0; m];
    if let Some(w) = warm {
        if let Some(wx) = &w.x {
            if wx.len() != n {
                return Err(QpError::Dimension("warm-start x".into()));
            }
            x = wx.iter().zip(&dinv).map(|(v, di)| v * di).collect();
        }
        if let Some(wy) = &w.y {
            if wy.len() != m {
                return Err(QpError::Dimension("warm-start y".into()));
            }
            y = wy.iter().zip(&einv).map(|(v, ei)| v * ei * s.c).collect();
        }
        let ax = s.a.mul_vec(&x);
        z = ax
            .iter()
            .enumerate()
            .map(|(i, v)| v.clamp(s.l[i], s.u[i]))
            .collect();
    }

    let alpha = settings.alpha;
    let mut rhs = vec![0.0; n];
    let mut work = vec![0.0; n];
    let mut tmp_m = vec![0.0; m];
    let mut zt = vec![0.0; m];
    let mut x_prev = x.clone();
    let mut y_prev = y.clone();
    let mut ax = vec![0.0; m];
    let mut px = vec![0.0; n];
    let mut aty = vec![0.0; n];

    let mut status = QpStatus::MaxIterations;
    let mut prim_res = f64::INFINITY;
    let mut dual_res = f64::INFINITY;
    let mut certificate = None;
    let mut iterations = 0;

    for iter in 1..=settings.max_iter {
        iterations = iter;
        x_prev.copy_from_slice(&x);
        y_prev.copy_from_slice(&y);

        for i in 0..m {
            tmp_m[i] = rho[i] * z[i] - y[i];
        }
        s.a.tr_mul_vec_into(&tmp_m, &mut rhs);
        for i in 0..n {
            rhs[i] += settings.sigma * x[i] - s.q[i];
        }
        kkt.solve_in_place(&mut rhs, &mut work);
        // rhs now holds x̃
        s.a.mul_vec_into(&rhs, &mut zt);
        for i in 0..n {
            x[i] = alpha * rhs[i] + (1.0 - alpha) * x[i];
        }
        for i in 0..m {
            let zhat = alpha * zt[i] + (1.0 - alpha) * z[i];
            let znew = (zhat + y[i] / rho[i]).clamp(s.l[i], s.u[i]);
            y[i] += rho[i] * (zhat - znew);
            z[i] = znew;
        }

        let check = iter % settings.check_interval.max(1) == 0 || iter == settings.max_iter;
        if check {
            s.a.mul_vec_into(&x, &mut ax);
            s.p.mul_vec_into(&x, &mut px);
            s.a.tr_mul_vec_into(&y, &mut aty);
            for i in 0..m {
                tmp_m[i] = ax[i] - z[i];
            }
            prim_res = scaled_inf_norm(&tmp_m, &einv);
            let dual_vec: Vec<f64> = (0..n).map(|i| px[i] + s.q[i] + aty[i]).collect();
            dual_res = scaled_inf_norm(&dual_vec, &dinv) / s.c;

            let eps_prim = settings.eps_abs
                + settings.eps_rel * scaled_inf_norm(&ax, &einv).max(scaled_inf_norm(&z, &einv));
            let eps_dual = settings.eps_abs
                + settings.eps_rel
                    * scaled_inf_norm(&px, &dinv)
                        .max(scaled_inf_norm(&aty, &dinv))
                        .max(scaled_inf_norm(&s.q, &dinv))
                    / s.c;
            if prim_res <= eps_prim && dual_res <= eps_dual {
                status = QpStatus::Solved;
                break;
            }

            if settings.adaptive_rho && iter % settings.adaptive_rho_interval.max(1) == 0 {
                let prim = inf_norm(&tmp_m) / inf_norm(&ax).max(inf_norm(&z)).max(1e-30);
                let dual_vec: Vec<f64> = (0..n).map(|i| px[i] + s.q[i] + aty[i]).collect();
                let dual = inf_norm(&dual_vec)
                    / inf_norm(&px).max(inf_norm(&aty)).max(inf_norm(&s.q)).max(1e-30);
                let proposed = (rho_base * (prim / dual.max(1e-30)).sqrt()).clamp(RHO_MIN, RHO_MAX);
                let tol = settings.adaptive_rho_tolerance;
                if proposed.is_finite() && (proposed > rho_base * tol || proposed < rho_base / tol) {
                    rho_base = proposed;
                    rho = row_rhos(&s, rho_base);
                    kkt = factor_kkt(&s, &rho, settings.sigma)?;
                }
            }
        }

        if iter % settings.infeasibility_interval.max(1) == 0 {
            if let Some(cert) = primal_infeasibility(prob, &s, &y, &y_prev, settings.eps_prim_inf)
            {
                status = QpStatus::PrimalInfeasible;
                certificate = Some(cert);
                break;
            }
            if let Some(cert) = dual_infeasibility(prob, &s, &x, &x_prev, settings.eps_dual_inf) {
                status = QpStatus::DualInfeasible;
                certificate = Some(cert);
                break;
            }
        }
    }

    let x_out: Vec<f64> = x.iter().zip(&s.d).map(|(v, d)| v * d).collect();
    let y_out: Vec<f64> = y.iter().zip(&s.e).map(|(v, e)| v * e / s.c).collect();
    let objective = match status {
        QpStatus::PrimalInfeasible => f64::INFINITY,
        QpStatus::DualInfeasible => f64::NEG_INFINITY,
        _ => prob.objective(&x_out),
    };
    Ok(QpSolution {
        x: x_out,
        y: y_out,
        status,
        iterations,
        primal_residual: prim_res,
        dual_residual: dual_res,
        objective,
        certificate,
    })
}

fn primal_infeasibility(
    prob: &QpProblem,
    s: &Scaled,
    y: &[f64],
    y_prev: &[f64],
    eps: f64,
) -> Option<Vec<f64>> {
    // Unscaled δy = E δȳ / c; the positive factor 1/c drops out after normalization.
    let dy: Vec<f64> = (0..y.len()).map(|i| (y[i] - y_prev[i]) * s.e[i]).collect();
    let norm = inf_norm(&dy);
    if norm < 1e-12 {
        return None;
    }
    let dy: Vec<f64> = dy.iter().map(|v| v / norm).collect();
    let aty = prob.a.tr_mul_vec(&dy);
    if inf_norm(&aty) > eps {
        return None;
    }
    let mut support = 0.0;
    for (i, &d) in dy.iter().enumerate() {
        if d > 0.0 {
            if prob.u[i] == f64::INFINITY {
                return None;
            }
            support += prob.u[i] * d;
        } else if d < 0.0 {
            if prob.l[i] == f64::NEG_INFINITY {
                return None;
            }
            support += prob.l[i] * d;
        }
    }
    (support < -eps).then_some(dy)
}

fn dual_infeasibility(
    prob: &QpProblem,
    s: &Scaled,
    x: &[f64],
    x_prev: &[f64],
    eps: f64,
) -> Option<Vec<f64>> {
    let dx: Vec<f64> = (0..x.len()).map(|i| (x[i] - x_prev[i]) * s.d[i]).collect();
    let norm = inf_norm(&dx);
    if norm < 1e-12 {
        return None;
    }
    let dx: Vec<f64> = dx.iter().map(|v| v / norm).collect();
    if inf_norm(&prob.p.mul_vec(&dx)) > eps || dot(&prob.q, &dx) >= -eps {
        return None;
    }
    let adx = prob.a.mul_vec(&dx);
    for (i, v) in adx.iter().enumerate() {
        let lo_ok = prob.l[i] == f64::NEG_INFINITY || *v >= -eps;
        let hi_ok = prob.u[i] == f64::INFINITY || *v <= eps;
        if !(lo_ok && hi_ok) {
            return None;
        }
    }
    Some(dx)
}
