//! Seeded random instance generators.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::qp::DenseQp;

/// Strictly convex QP with `n` variables and `m` rows that is feasible by
/// construction (a random `x₀` satisfies every row). Returns the problem and `x₀`.
/// Rows are a mix of two-sided, one-sided and equality constraints, with at most
/// `n / 3` equalities.
pub fn random_feasible_qp(seed: u64, n: usize, m: usize) -> (DenseQp, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factor = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let p = factor.transpose() * &factor + DMatrix::identity(n, n) * 0.1;
    let q = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
    let density: f64 = rng.random_range(0.2..1.0);
    let mut a = DMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            if rng.random_bool(density) {
                a[(i, j)] = rng.random_range(-2.0..2.0);
            }
        }
        if (0..n).all(|j| a[(i, j)] == 0.0) {
            a[(i, rng.random_range(0..n))] = 1.0;
        }
    }
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let v = &a * &x0;
    let mut eq_left = n / 3;
    let mut l = vec![0.0; m];
    let mut u = vec![0.0; m];
    for i in 0..m {
        let kind = rng.random_range(0..10);
        let lo = v[i] - rng.random_range(0.0..1.0);
        let hi = v[i] + rng.random_range(0.0..1.0);
        (l[i], u[i]) = match kind {
            0 if eq_left > 0 => {
                eq_left -= 1;
                (v[i], v[i])
            }
            1 | 2 => (lo, f64::INFINITY),
            3 | 4 => (f64::NEG_INFINITY, hi),
            _ => (lo, hi),
        };
    }
    (DenseQp { p, q, a, l, u }, x0)
}
