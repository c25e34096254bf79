//! Exact reference solvers for strictly convex QPs
//! `min ½xᵀPx + qᵀx  s.t.  l ≤ Ax ≤ u` given as dense row-major data.

use nalgebra::{DMatrix, DVector};

pub struct DenseQp {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a: DMatrix<f64>,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
}

impl DenseQp {
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x)
    }
}

/// Solves `min ½xᵀPx + qᵀx s.t. Cx = d`; returns `(x, λ)` with `Px + q = Cᵀλ`.
fn equality_qp(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    c: &[DVector<f64>],
    d: &[f64],
) -> Option<(DVector<f64>, Vec<f64>)> {
    let n = p.nrows();
    let k = c.len();
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(p);
    let mut rhs = DVector::zeros(n + k);
    for i in 0..n {
        rhs[i] = -q[i];
    }
    for (j, row) in c.iter().enumerate() {
        for i in 0..n {
            kkt[(i, n + j)] = -row[i];
            kkt[(n + j, i)] = row[i];
        }
        rhs[n + j] = d[j];
    }
    let sol = kkt.lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((sol.rows(0, n).into_owned(), sol.rows(n, k).iter().copied().collect()))
}

#[derive(Clone, Copy, PartialEq)]
enum RowState {
    Free,
    Lower,
    Upper,
}

/// Enumerates every assignment of rows to {inactive, at lower, at upper},
/// solves the resulting equality QP, and keeps the best KKT point.
/// Exponential in `m`; intended for `m ≤ 10`.
pub fn enumerate_active_sets(qp: &DenseQp, tol: f64) -> Option<(DVector<f64>, f64)> {
    let m = qp.a.nrows();
    let rows: Vec<DVector<f64>> = (0..m).map(|i| qp.a.row(i).transpose()).collect();
    let mut states = vec![RowState::Free; m];
    let mut best: Option<(DVector<f64>, f64)> = None;
    loop {
        let mut c = Vec::new();
        let mut d = Vec::new();
        let mut valid = true;
        for i in 0..m {
            match states[i] {
                RowState::Free => {}
                RowState::Lower if qp.l[i].is_finite() => {
                    c.push(rows[i].clone());
                    d.push(qp.l[i]);
                }
                RowState::Upper if qp.u[i].is_finite() && qp.u[i] != qp.l[i] => {
                    c.push(rows[i].clone());
                    d.push(qp.u[i]);
                }
                _ => valid = false,
            }
        }
        if valid {
            if let Some((x, lam)) = equality_qp(&qp.p, &qp.q, &c, &d) {
                let ax = &qp.a * &x;
                let feasible = (0..m).all(|i| ax[i] >= qp.l[i] - tol && ax[i] <= qp.u[i] + tol);
                let mut j = 0;
                let mut signs_ok = true;
                for i in 0..m {
                    match states[i] {
                        RowState::Free => continue,
                        // Px + q = λ a_i: λ ≥ 0 at a lower bound, ≤ 0 at an upper bound
                        RowState::Lower if qp.l[i] != qp.u[i] => signs_ok &= lam[j] >= -tol,
                        RowState::Upper => signs_ok &= lam[j] <= tol,
                        _ => {}
                    }
                    j += 1;
                }
                if feasible && signs_ok {
                    let f = qp.objective(&x);
                    if best.as_ref().is_none_or(|(_, b)| f < *b) {
                        best = Some((x, f));
                    }
                }
            }
        }
        // advance the base-3 counter
        let mut i = 0;
        loop {
            if i == m {
                return best;
            }
            states[i] = match states[i] {
                RowState::Free => RowState::Lower,
                RowState::Lower => RowState::Upper,
                RowState::Upper => RowState::Free,
            };
            if states[i] != RowState::Free {
                break;
            }
            i += 1;
        }
    }
}

/// Primal active-set method started from a feasible point `x0`.
///
/// Each two-sided row contributes up to two one-sided constraints `cᵀx ≥ b`.
/// Rows with `l = u` stay in the working set throughout.
pub fn primal_active_set(qp: &DenseQp, x0: &DVector<f64>, max_iter: usize) -> Option<(DVector<f64>, f64)> {
    let m = qp.a.nrows();
    let mut cons: Vec<(DVector<f64>, f64, bool)> = Vec::new();
    for i in 0..m {
        let row = qp.a.row(i).transpose();
        if qp.l[i] == qp.u[i] {
            cons.push((row, qp.l[i], true));
            continue;
        }
        if qp.l[i].is_finite() {
            cons.push((row.clone(), qp.l[i], false));
        }
        if qp.u[i].is_finite() {
            cons.push((-row, -qp.u[i], false));
        }
    }
    let mut x = x0.clone();
    let mut working: Vec<usize> = (0..cons.len()).filter(|&j| cons[j].2).collect();
    for _ in 0..max_iter {
        let g = &qp.p * &x + &qp.q;
        let c: Vec<DVector<f64>> = working.iter().map(|&j| cons[j].0.clone()).collect();
        let zeros = vec![0.0; c.len()];
        let (step, lam) = equality_qp(&qp.p, &g, &c, &zeros)?;
        if step.amax() <= 1e-12 * (1.0 + x.amax()) {
            let mut worst: Option<(usize, f64)> = None;
            for (k, &j) in working.iter().enumerate() {
                if !cons[j].2 && lam[k] < -1e-12 && worst.is_none_or(|(_, v)| lam[k] < v) {
                    worst = Some((k, lam[k]));
                }
            }
            match worst {
                None => {
                    let f = qp.objective(&x);
                    return Some((x, f));
                }
                Some((k, _)) => {
                    working.remove(k);
                }
            }
        } else {
            let mut t = 1.0;
            let mut blocking = None;
            for (j, (row, b, _)) in cons.iter().enumerate() {
                if working.contains(&j) {
                    continue;
                }
                let rate = row.dot(&step);
                if rate < -1e-14 {
                    let tj = ((b - row.dot(&x)) / rate).max(0.0);
                    if tj < t {
                        t = tj;
                        blocking = Some(j);
                    }
                }
            }
            x += t * step;
            if let Some(j) = blocking {
                working.push(j);
            }
        }
    }
    None
}
