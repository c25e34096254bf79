use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TiltConfig {
    pub pitch_limit: f64,
    /// Recovery ends once |pitch| drops below `hysteresis · pitch_limit`.
    pub hysteresis: f64,
    pub backtrack_speed: f64,
    pub history_len: usize,
}

impl Default for TiltConfig {
    fn default() -> Self {
        Self {
            pitch_limit: 0.35,
            hysteresis: 0.8,
            backtrack_speed: 0.2,
            history_len: 50,
        }
    }
}

/// Bounded buffer of recent poses `[x, y, θ]`, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseHistory {
    cap: usize,
    poses: VecDeque<[f64; 3]>,
}

impl PoseHistory {
    pub fn new(cap: usize) -> Self {
        assert!(cap > 0, "history capacity must be positive");
        Self {
            cap,
            poses: VecDeque::with_capacity(cap),
        }
    }

    pub fn push(&mut self, pose: [f64; 3]) {
        if self.poses.len() == self.cap {
            self.poses.pop_front();
        }
        self.poses.push_back(pose);
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn clear(&mut self) {
        self.poses.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64; 3]> {
        self.poses.iter()
    }

    /// Newest pose first.
    pub fn reversed(&self) -> Vec<[f64; 3]> {
        self.poses.iter().rev().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TiltDecision {
    None,
    /// Drive back along `path` (newest pose first) at `speed`.
    Backtrack { path: Vec<[f64; 3]>, speed: f64 },
    Continue,
    Recovered,
    EmergencyStop,
}

/// `active` says whether a backtrack is already running.
pub fn tilt_recovery(active: bool, pitch: f64, history: &PoseHistory, cfg: &TiltConfig) -> TiltDecision {
    let p = pitch.abs();
    if active {
        if p < cfg.hysteresis * cfg.pitch_limit {
            TiltDecision::Recovered
        } else {
            TiltDecision::Continue
        }
    } else if p > cfg.pitch_limit {
        if history.is_empty() {
            TiltDecision::EmergencyStop
        } else {
            TiltDecision::Backtrack {
                path: history.reversed(),
                speed: cfg.backtrack_speed,
            }
        }
    } else {
        TiltDecision::None
    }
}
