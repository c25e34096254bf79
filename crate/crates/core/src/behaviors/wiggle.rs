use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WiggleConfig {
    /// Seconds of standing still under nonzero commands before a wiggle.
    pub window: f64,
    /// Speeds below this count as standing still (m/s).
    pub speed_threshold: f64,
    /// Displacement that counts as progress (m); one map cell.
    pub epsilon: f64,
    /// Failed wiggles before the robot is declared stuck.
    pub max_attempts: usize,
    /// Figure-8 forward speed (m/s) and yaw rate (rad/s).
    pub speed: f64,
    pub yaw_rate: f64,
}

impl Default for WiggleConfig {
    fn default() -> Self {
        Self {
            window: 5.0,
            speed_threshold: 0.05,
            epsilon: 0.2,
            max_attempts: 3,
            speed: 0.3,
            yaw_rate: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WiggleDecision {
    None,
    /// Velocity commands `[forward speed, yaw rate]`, one per control period.
    Wiggle(Vec<[f64; 2]>),
    Stuck,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct WiggleMonitor {
    pub stationary_time: f64,
    pub failures: usize,
    anchor: Option<[f64; 2]>,
}

impl WiggleMonitor {
    /// Advances the standing-still timer by `dt`. Returns a wiggle once the
    /// timer reaches the window, or `Stuck` once `max_attempts` wiggles have
    /// failed.
    pub fn check(
        &mut self,
        commanded: bool,
        speed: f64,
        position: [f64; 2],
        dt: f64,
        cfg: &WiggleConfig,
    ) -> WiggleDecision {
        if !commanded || speed.abs() >= cfg.speed_threshold {
            self.stationary_time = 0.0;
            return WiggleDecision::None;
        }
        self.stationary_time += dt;
        if self.stationary_time + 1e-9 < cfg.window {
            return WiggleDecision::None;
        }
        if self.failures >= cfg.max_attempts {
            return WiggleDecision::Stuck;
        }
        self.stationary_time = 0.0;
        if self.anchor.is_none() {
            self.anchor = Some(position);
        }
        WiggleDecision::Wiggle(figure_eight(cfg.speed, cfg.yaw_rate, dt))
    }

    /// Reports where the robot ended up after a wiggle. Returns true when
    /// the robot is now declared stuck.
    pub fn finish(&mut self, position: [f64; 2], cfg: &WiggleConfig) -> bool {
        let anchor = self.anchor.unwrap_or(position);
        if (position[0] - anchor[0]).hypot(position[1] - anchor[1]) > cfg.epsilon {
            self.failures = 0;
            self.anchor = None;
        } else {
            self.failures += 1;
        }
        self.failures >= cfg.max_attempts
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

/// Two full turns at constant speed, the second with the yaw rate reversed.
/// The yaw rate is adjusted so each turn takes a whole number of periods,
/// which makes the path close exactly. The path stays within a
/// `2r × 4r` box, `r = speed / yaw_rate`.
pub fn figure_eight(speed: f64, yaw_rate: f64, dt: f64) -> Vec<[f64; 2]> {
    let n = ((TAU / (yaw_rate.abs() * dt)).round() as usize).max(4);
    let w = TAU / (n as f64 * dt);
    let mut out = vec![[speed, w]; n];
    out.extend(std::iter::repeat_n([speed, -w], n));
    out
}

/// Exact unicycle integration of velocity commands from `pose`.
pub fn integrate_unicycle(pose: [f64; 3], commands: &[[f64; 2]], dt: f64) -> Vec<[f64; 3]> {
    let mut p = pose;
    let mut out = Vec::with_capacity(commands.len() + 1);
    out.push(p);
    for &[v, w] in commands {
        if w.abs() < 1e-12 {
            p[0] += v * dt * p[2].cos();
            p[1] += v * dt * p[2].sin();
        } else {
            let th = p[2] + w * dt;
            p[0] += v / w * (th.sin() - p[2].sin());
            p[1] -= v / w * (th.cos() - p[2].cos());
            p[2] = th;
        }
        out.push(p);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timer_fires_at_the_window() {
        let cfg = WiggleConfig::default();
        let mut m = WiggleMonitor::default();
        let mut fired_at = None;
        for k in 1..=100 {
            if let WiggleDecision::Wiggle(_) = m.check(true, 0.0, [0.0, 0.0], 0.1, &cfg) {
                fired_at = Some(k);
                break;
            }
        }
        assert_eq!(fired_at, Some(50));
    }

    #[test]
    fn moving_resets_the_timer() {
        let cfg = WiggleConfig::default();
        let mut m = WiggleMonitor::default();
        for _ in 0..40 {
            m.check(true, 0.0, [0.0, 0.0], 0.1, &cfg);
        }
        m.check(true, 0.5, [0.0, 0.0], 0.1, &cfg);
        assert_eq!(m.stationary_time, 0.0);
    }

    #[test]
    fn figure_eight_closes() {
        let cmds = figure_eight(0.3, 1.0, 0.1);
        let path = integrate_unicycle([1.0, 2.0, 0.3], &cmds, 0.1);
        let end = path.last().unwrap();
        assert!((end[0] - 1.0).abs() < 1e-9 && (end[1] - 2.0).abs() < 1e-9);
    }
}
