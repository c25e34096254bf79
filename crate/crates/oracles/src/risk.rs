use crate::simpson;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const TAIL_SPAN: f64 = 14.0;

fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

fn panels(len: f64) -> usize {
    ((len.abs() / 2e-3).ceil() as usize).max(16)
}

/// Standard normal CDF by integrating the density from 0.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 + simpson(pdf, 0.0, z, panels(z))
}

/// Quantile of the standard normal by bisection on [`normal_cdf`].
pub fn normal_quantile(alpha: f64) -> f64 {
    let (mut lo, mut hi) = (-12.0, 12.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// E[X | X ≥ q_α] for X ~ N(0,1), integrated numerically.
pub fn standard_tail_expectation(alpha: f64) -> f64 {
    let z = normal_quantile(alpha);
    simpson(|x| x * pdf(x), z, z + TAIL_SPAN, panels(TAIL_SPAN)) / (1.0 - alpha)
}

/// CVaR of N(mu, sigma²) via the tail-expectation integral.
pub fn cvar_by_integration(mu: f64, sigma: f64, alpha: f64) -> f64 {
    mu + sigma * standard_tail_expectation(alpha)
}

/// CVaR of N(mu, sigma²) from the variational form
/// `inf_z z + E[(R − z)₊]/(1 − α)`, with the expectation integrated numerically
/// and the infimum found by golden-section search.
pub fn cvar_by_minimization(mu: f64, sigma: f64, alpha: f64) -> f64 {
    if sigma == 0.0 {
        return mu;
    }
    let objective = |z: f64| {
        // substitute x = mu + sigma t
        let t0 = (z - mu) / sigma;
        let excess = simpson(
            |t| (mu + sigma * t - z) * pdf(t),
            t0,
            t0.max(0.0) + TAIL_SPAN,
            panels(t0.max(0.0) + TAIL_SPAN - t0),
        );
        z + excess / (1.0 - alpha)
    };
    let (mut a, mut b) = (mu - 10.0 * sigma, mu + 10.0 * sigma);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    while (b - a) > 1e-7 * sigma {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = objective(d);
        }
    }
    objective(0.5 * (a + b))
}

/// Nested evaluation `μ₀ + ρ(R₁ + ρ(R₂ + … ρ(R_N)))` where each ρ is evaluated
/// on the Gaussian `R_k + c` with `c` the already-evaluated inner value.
pub fn nested_compounded_risk(cells: &[(f64, f64)], alpha: f64) -> f64 {
    let Some(((mu0, _), rest)) = cells.split_first() else {
        return 0.0;
    };
    let mut inner = 0.0;
    for &(mu, sigma) in rest.iter().rev() {
        inner = cvar_by_minimization(mu + inner, sigma, alpha);
    }
    mu0 + inner
}
