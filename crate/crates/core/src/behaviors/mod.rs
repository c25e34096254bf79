//! Mission-level behavior layer: risk-level adjustment, recovery behaviors
//! and gait selection, stepped once per control cycle.

mod alpha;
mod escape;
mod gait;
mod tilt;
mod wiggle;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use alpha::{adjust_alpha, AlphaConfig};
pub use escape::{escape_goal, escape_lethal, EscapeConfig, EscapeFailure, EscapeGoal, EscapePlan};
pub use gait::{clearance_deficit, gait_select, Gait, GaitConfig};
pub use tilt::{tilt_recovery, PoseHistory, TiltConfig, TiltDecision};
pub use wiggle::{figure_eight, integrate_unicycle, WiggleConfig, WiggleDecision, WiggleMonitor};

use crate::planner::{plan_astar, AstarConfig};
use crate::riskmap::CvarMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Nominal,
    TiltRecovery,
    Wiggle,
    EscapeLethal,
    EmergencyStop,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Nominal => "nominal",
            Mode::TiltRecovery => "tilt_recovery",
            Mode::Wiggle => "wiggle",
            Mode::EscapeLethal => "escape_lethal",
            Mode::EmergencyStop => "emergency_stop",
        }
    }

    /// Transitions the machine may take in one step.
    pub fn can_enter(self, to: Mode) -> bool {
        use Mode::*;
        match self {
            Nominal => to != Nominal,
            TiltRecovery => matches!(to, Nominal | EmergencyStop),
            Wiggle | EscapeLethal => matches!(to, Nominal | EmergencyStop | TiltRecovery),
            EmergencyStop => to == Nominal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BehaviorConfig {
    /// Mission risk posture α returns to while plans stay feasible.
    pub posture: f64,
    pub alpha: AlphaConfig,
    pub tilt: TiltConfig,
    pub wiggle: WiggleConfig,
    pub escape: EscapeConfig,
    pub gait: GaitConfig,
    /// Search used to test escape-goal reachability.
    pub astar: AstarConfig,
}

impl Default for BehaviorConfig {
    fn default() -> Self {
        Self {
            posture: 0.9,
            alpha: AlphaConfig::default(),
            tilt: TiltConfig::default(),
            wiggle: WiggleConfig::default(),
            escape: EscapeConfig::default(),
            gait: GaitConfig::default(),
            astar: AstarConfig::default(),
        }
    }
}

/// Everything the machine observes in one cycle.
#[derive(Debug, Clone, Copy)]
pub struct BehaviorInputs<'a> {
    pub t: f64,
    pub dt: f64,
    pub pose: [f64; 3],
    pub pitch: f64,
    pub speed: f64,
    /// The planner is asking for motion.
    pub commanded: bool,
    pub plan_feasible: bool,
    pub cvar: Option<&'a CvarMap>,
    pub ceiling_height: Option<f64>,
    pub p_slip: f64,
    pub stair: bool,
    /// The running backtrack, wiggle or escape maneuver has finished.
    pub action_done: bool,
    /// Operator request to leave an emergency stop.
    pub resume: bool,
}

impl<'a> BehaviorInputs<'a> {
    pub fn at(t: f64, dt: f64, pose: [f64; 3]) -> Self {
        Self {
            t,
            dt,
            pose,
            pitch: 0.0,
            speed: 0.0,
            commanded: false,
            plan_feasible: true,
            cvar: None,
            ceiling_height: None,
            p_slip: 0.0,
            stair: false,
            action_done: false,
            resume: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BehaviorCommand {
    /// Plan and track normally at risk level `alpha`.
    Nominal { alpha: f64 },
    Backtrack { path: Vec<[f64; 3]>, speed: f64 },
    Wiggle(Vec<[f64; 2]>),
    Escape(EscapePlan),
    /// Keep executing the maneuver already issued.
    Hold,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorEvent {
    pub t: f64,
    /// `mode` or `gait`.
    pub kind: String,
    pub from: String,
    pub to: String,
    pub trigger: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BehaviorState {
    pub mode: Mode,
    pub alpha_current: f64,
    /// Seconds spent standing still under nonzero commands.
    pub stuck_timer: f64,
    #[serde(skip)]
    pub history: PoseHistory,
    pub gait: Gait,
    pub feasible_streak: usize,
    pub lethal_time: f64,
    /// Set when the robot was declared stuck or no escape exists.
    pub mission_ended: bool,
}

#[derive(Debug, Clone)]
pub struct BehaviorMachine {
    pub cfg: BehaviorConfig,
    state: BehaviorState,
    wiggle: WiggleMonitor,
    events: Vec<BehaviorEvent>,
}

impl BehaviorMachine {
    pub fn new(cfg: BehaviorConfig) -> Self {
        assert!(cfg.posture > 0.0 && cfg.posture < 1.0, "posture must lie in (0, 1)");
        Self {
            state: BehaviorState {
                mode: Mode::Nominal,
                alpha_current: cfg.posture,
                stuck_timer: 0.0,
                history: PoseHistory::new(cfg.tilt.history_len.max(1)),
                gait: Gait::Walk,
                feasible_streak: 0,
                lethal_time: 0.0,
                mission_ended: false,
            },
            cfg,
            wiggle: WiggleMonitor::default(),
            events: Vec::new(),
        }
    }

    pub fn state(&self) -> &BehaviorState {
        &self.state
    }

    pub fn mode(&self) -> Mode {
        self.state.mode
    }

    pub fn events(&self) -> &[BehaviorEvent] {
        &self.events
    }

    pub fn take_events(&mut self) -> Vec<BehaviorEvent> {
        std::mem::take(&mut self.events)
    }

    fn enter(&mut self, t: f64, to: Mode, trigger: &str) {
        let from = self.state.mode;
        debug_assert!(from.can_enter(to), "{from:?} -> {to:?}");
        self.events.push(BehaviorEvent {
            t,
            kind: "mode".into(),
            from: from.name().into(),
            to: to.name().into(),
            trigger: trigger.into(),
        });
        self.state.mode = to;
    }

    fn update_gait(&mut self, inp: &BehaviorInputs) {
        let deficit = clearance_deficit(inp.ceiling_height, &self.cfg.gait);
        let next = gait_select(deficit, inp.p_slip, inp.stair, &self.cfg.gait);
        if next != self.state.gait {
            let trigger = match next {
                Gait::Stair => "stair",
                Gait::Crawl => "slip",
                Gait::Crouch => "ceiling",
                Gait::Walk => "clear",
            };
            self.events.push(BehaviorEvent {
                t: inp.t,
                kind: "gait".into(),
                from: self.state.gait.name().into(),
                to: next.name().into(),
                trigger: trigger.into(),
            });
            self.state.gait = next;
        }
    }

    fn robot_lethal(inp: &BehaviorInputs) -> bool {
        inp.cvar.is_some_and(|m| {
            let g = m.geometry();
            g.cell_at(inp.pose[0], inp.pose[1]).is_some_and(|(ix, iy)| m.is_lethal(g.index(ix, iy)))
        })
    }

    fn tilted(&self, inp: &BehaviorInputs) -> bool {
        inp.pitch.abs() > self.cfg.tilt.pitch_limit
    }

    fn start_backtrack(&mut self, inp: &BehaviorInputs) -> BehaviorCommand {
        match tilt_recovery(false, inp.pitch, &self.state.history, &self.cfg.tilt) {
            TiltDecision::Backtrack { path, speed } => {
                self.enter(inp.t, Mode::TiltRecovery, "pitch_limit");
                BehaviorCommand::Backtrack { path, speed }
            }
            _ => {
                self.enter(inp.t, Mode::EmergencyStop, "empty_history");
                BehaviorCommand::Stop
            }
        }
    }

    pub fn step(&mut self, inp: &BehaviorInputs) -> BehaviorCommand {
        self.update_gait(inp);
        let lethal = Self::robot_lethal(inp);
        self.state.lethal_time = if lethal { self.state.lethal_time + inp.dt } else { 0.0 };
        let pos = [inp.pose[0], inp.pose[1]];

        let cmd = match self.state.mode {
            Mode::Nominal => self.step_nominal(inp, pos),
            Mode::TiltRecovery => match tilt_recovery(true, inp.pitch, &self.state.history, &self.cfg.tilt) {
                TiltDecision::Recovered => {
                    self.state.history.clear();
                    self.enter(inp.t, Mode::Nominal, "recovered");
                    BehaviorCommand::Nominal { alpha: self.state.alpha_current }
                }
                _ if inp.action_done => {
                    self.enter(inp.t, Mode::EmergencyStop, "backtrack_exhausted");
                    BehaviorCommand::Stop
                }
                _ => BehaviorCommand::Hold,
            },
            Mode::Wiggle => {
                if self.tilted(inp) {
                    self.start_backtrack(inp)
                } else if inp.action_done {
                    if self.wiggle.finish(pos, &self.cfg.wiggle) {
                        self.state.mission_ended = true;
                        self.enter(inp.t, Mode::EmergencyStop, "stuck");
                        BehaviorCommand::Stop
                    } else {
                        self.enter(inp.t, Mode::Nominal, "wiggle_done");
                        BehaviorCommand::Nominal { alpha: self.state.alpha_current }
                    }
                } else {
                    BehaviorCommand::Hold
                }
            }
            Mode::EscapeLethal => {
                if self.tilted(inp) {
                    self.start_backtrack(inp)
                } else if inp.action_done {
                    if lethal {
                        self.enter(inp.t, Mode::EmergencyStop, "still_lethal");
                        BehaviorCommand::Stop
                    } else {
                        self.state.lethal_time = 0.0;
                        self.enter(inp.t, Mode::Nominal, "escaped");
                        BehaviorCommand::Nominal { alpha: self.state.alpha_current }
                    }
                } else {
                    BehaviorCommand::Hold
                }
            }
            Mode::EmergencyStop => {
                if inp.resume && !self.tilted(inp) {
                    self.state.mission_ended = false;
                    self.state.lethal_time = 0.0;
                    self.wiggle.reset();
                    self.enter(inp.t, Mode::Nominal, "resume");
                    BehaviorCommand::Nominal { alpha: self.state.alpha_current }
                } else {
                    BehaviorCommand::Stop
                }
            }
        };
        self.state.stuck_timer = self.wiggle.stationary_time;
        cmd
    }

    fn step_nominal(&mut self, inp: &BehaviorInputs, pos: [f64; 2]) -> BehaviorCommand {
        if self.tilted(inp) {
            return self.start_backtrack(inp);
        }
        self.state.history.push(inp.pose);
        if let Some(map) = inp.cvar.filter(|_| self.state.lethal_time + 1e-9 >= self.cfg.escape.dwell_time) {
            let astar = self.cfg.astar;
            let plan = escape_lethal(map, pos, &self.cfg.escape, |m, goal| plan_astar(m, pos, goal.position, &astar).is_ok());
            return match plan {
                Ok(plan) => {
                    self.enter(inp.t, Mode::EscapeLethal, "lethal_dwell");
                    BehaviorCommand::Escape(plan)
                }
                Err(e) => {
                    self.state.mission_ended = e == EscapeFailure::NoSafeCell;
                    self.enter(inp.t, Mode::EmergencyStop, "escape_failed");
                    BehaviorCommand::Stop
                }
            };
        }
        match self.wiggle.check(inp.commanded, inp.speed, pos, inp.dt, &self.cfg.wiggle) {
            WiggleDecision::Wiggle(cmds) => {
                self.enter(inp.t, Mode::Wiggle, "stationary");
                return BehaviorCommand::Wiggle(cmds);
            }
            WiggleDecision::Stuck => {
                self.state.mission_ended = true;
                self.enter(inp.t, Mode::EmergencyStop, "stuck");
                return BehaviorCommand::Stop;
            }
            WiggleDecision::None => {}
        }
        self.state.feasible_streak = if inp.plan_feasible { self.state.feasible_streak + 1 } else { 0 };
        self.state.alpha_current = adjust_alpha(
            self.state.alpha_current,
            inp.plan_feasible,
            self.state.feasible_streak,
            self.cfg.posture,
            &self.cfg.alpha,
        );
        BehaviorCommand::Nominal { alpha: self.state.alpha_current }
    }
}

/// One JSON object per line.
pub fn write_events_jsonl<W: Write>(events: &[BehaviorEvent], mut w: W) -> crate::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
