use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlphaConfig {
    /// Decrement applied on an infeasible plan.
    pub delta: f64,
    pub alpha_min: f64,
    /// Consecutive feasible cycles before α starts relaxing back.
    pub relax_after: usize,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        Self {
            delta: 0.2,
            alpha_min: 0.1,
            relax_after: 5,
        }
    }
}

/// One cycle of risk-level adjustment. An infeasible plan lowers α by `delta`
/// down to `alpha_min`. A feasible streak of at least `relax_after` cycles
/// moves α toward `posture` by `delta / 2`.
pub fn adjust_alpha(alpha: f64, feasible: bool, feasible_streak: usize, posture: f64, cfg: &AlphaConfig) -> f64 {
    debug_assert!(alpha > 0.0 && alpha < 1.0);
    let next = if !feasible {
        alpha.min((alpha - cfg.delta).max(cfg.alpha_min))
    } else if feasible_streak >= cfg.relax_after {
        let step = 0.5 * cfg.delta;
        if alpha < posture {
            (alpha + step).min(posture)
        } else {
            (alpha - step).max(posture)
        }
    } else {
        alpha
    };
    next.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}
