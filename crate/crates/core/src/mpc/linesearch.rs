use super::config::LinesearchConfig;
use super::cost::CostContext;
use super::library::{Trajectory, TrajectorySource};
use super::model::ControlInput;

#[derive(Debug, Clone)]
pub struct LinesearchResult {
    /// Step length of the last trial.
    pub gamma: f64,
    /// Step length to start from next time.
    pub gamma_next: f64,
    pub solved: bool,
    /// The accepted trajectory, or the candidate if nothing was accepted.
    pub trajectory: Trajectory,
    pub cost: f64,
    pub violations: usize,
    pub trials: usize,
}

/// Tries `û + γ·δu`, accepting the first step that increases neither the
/// cost nor the number of violating steps. γ doubles after an acceptance and
/// halves after a rejection, within `[γ_min, γ_max]`.
pub fn linesearch(
    candidate: &Trajectory,
    delta_u: &[ControlInput],
    gamma: f64,
    ctx: &CostContext,
    cfg: &LinesearchConfig,
) -> LinesearchResult {
    let model = &ctx.cfg.model;
    let limits = &ctx.cfg.limits;
    let mut base = candidate.clone();
    let (c0, o0) = ctx.evaluate(&mut base);
    let mut gamma = gamma.clamp(cfg.gamma_min, cfg.gamma_max);
    let x0 = candidate.states[0];
    for trial in 0..cfg.max_iterations {
        let controls: Vec<ControlInput> = candidate
            .controls
            .iter()
            .zip(delta_u)
            .map(|(u, d)| ControlInput([0, 1, 2].map(|i| u.0[i] + gamma * d.0[i])))
            .collect();
        let mut t = Trajectory::from_controls(
            model,
            limits,
            &x0,
            &controls,
            candidate.dt,
            TrajectorySource::Optimized,
            "optimized",
        );
        let (c, o) = ctx.evaluate(&mut t);
        if c <= c0 && o <= o0 {
            return LinesearchResult {
                gamma,
                gamma_next: (2.0 * gamma).min(cfg.gamma_max),
                solved: true,
                trajectory: t,
                cost: c,
                violations: o,
                trials: trial + 1,
            };
        }
        gamma = (gamma / 2.0).max(cfg.gamma_min);
    }
    LinesearchResult {
        gamma,
        gamma_next: gamma,
        solved: false,
        trajectory: base,
        cost: c0,
        violations: o0,
        trials: cfg.max_iterations,
    }
}
