use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use step_core::behaviors::{
    adjust_alpha, escape_goal, escape_lethal, figure_eight, gait_select, integrate_unicycle, tilt_recovery,
    write_events_jsonl, AlphaConfig, BehaviorCommand, BehaviorConfig, BehaviorEvent, BehaviorInputs,
    BehaviorMachine, EscapeConfig, EscapeFailure, Gait, GaitConfig, Mode, PoseHistory, TiltConfig, TiltDecision,
    WiggleConfig, WiggleDecision, WiggleMonitor,
};
use step_core::grid::{line_cells, GridGeometry};
use step_core::riskmap::{CellRisk, CvarMap};

fn lethal_map(w: usize, h: usize, lethal: &[bool]) -> CvarMap {
    let g = GridGeometry::new([0.0, 0.0], 1.0, w, h).unwrap();
    let cells: Vec<CellRisk> = lethal
        .iter()
        .map(|&l| if l { CellRisk { mu: 2.0, sigma: 0.0 } } else { CellRisk { mu: 0.0, sigma: 0.0 } })
        .collect();
    CvarMap::from_cells(g, &cells, 0.5, 1.0).unwrap()
}

#[test]
fn alpha_rule_examples() {
    let cfg = AlphaConfig::default();
    assert_eq!(adjust_alpha(0.9, true, 50, 0.9, &cfg), 0.9);
    assert!((adjust_alpha(0.9, false, 0, 0.9, &cfg) - 0.7).abs() < 1e-15);
    let mut a = 0.9;
    for _ in 0..6 {
        a = adjust_alpha(a, false, 0, 0.9, &cfg);
    }
    assert_eq!(a, cfg.alpha_min);
}

proptest! {
    #[test]
    fn alpha_stays_in_the_open_unit_interval(
        start in 0.01f64..0.99,
        posture in 0.01f64..0.99,
        flags in prop::collection::vec(any::<bool>(), 1..60),
    ) {
        let cfg = AlphaConfig::default();
        let (mut a, mut streak) = (start, 0);
        for f in flags {
            streak = if f { streak + 1 } else { 0 };
            let next = adjust_alpha(a, f, streak, posture, &cfg);
            prop_assert!(next > 0.0 && next < 1.0);
            if !f {
                prop_assert!(next <= a);
            }
            a = next;
        }
    }
}

#[test]
fn backtrack_replays_history_in_reverse() {
    let cfg = TiltConfig::default();
    let mut h = PoseHistory::new(20);
    let poses: Vec<[f64; 3]> = (0..5).map(|i| [i as f64 * 0.1, 0.0, 0.0]).collect();
    for p in &poses {
        h.push(*p);
    }
    assert_eq!(tilt_recovery(false, 0.0, &h, &cfg), TiltDecision::None);
    let TiltDecision::Backtrack { path, speed } = tilt_recovery(false, 0.5, &h, &cfg) else {
        panic!("no backtrack")
    };
    let mut want = poses.clone();
    want.reverse();
    assert_eq!(path, want);
    assert_eq!(speed, cfg.backtrack_speed);
}

/// Drives up a ramp that steepens with x; the machine must back down it and
/// hand control back once the pitch has dropped through the hysteresis band.
#[test]
fn tilt_scenario_backs_off_the_ramp() {
    let pitch_at = |x: f64| if x < 2.0 { 0.0 } else { 0.25 * (x - 2.0) };
    let mut m = BehaviorMachine::new(BehaviorConfig::default());
    let dt = 0.1;
    let mut x = 0.0;
    let mut path: Vec<[f64; 3]> = Vec::new();
    let mut t = 0.0;
    let mut saw_backtrack = false;
    for _ in 0..400 {
        let mut inp = BehaviorInputs::at(t, dt, [x, 0.0, 0.0]);
        inp.pitch = pitch_at(x);
        inp.speed = 0.5;
        inp.commanded = true;
        inp.action_done = saw_backtrack && path.is_empty();
        match m.step(&inp) {
            BehaviorCommand::Nominal { .. } => {
                if saw_backtrack {
                    break;
                }
                x += 0.5 * dt;
            }
            BehaviorCommand::Backtrack { path: p, speed } => {
                saw_backtrack = true;
                assert!(speed <= 0.2 + 1e-12);
                path = p;
            }
            BehaviorCommand::Hold => {
                // follow the stored path at backtrack speed
                let step = 0.2 * dt;
                while let Some(next) = path.first().copied() {
                    if (next[0] - x).abs() <= step {
                        x = next[0];
                        path.remove(0);
                    } else {
                        x += step * (next[0] - x).signum();
                        break;
                    }
                }
            }
            other => panic!("unexpected {other:?}"),
        }
        t += dt;
    }
    assert!(saw_backtrack);
    assert_eq!(m.mode(), Mode::Nominal);
    assert!(pitch_at(x) < 0.8 * 0.35);
    let modes: Vec<(String, String)> = m.events().iter().map(|e| (e.from.clone(), e.to.clone())).collect();
    assert_eq!(
        modes,
        vec![("nominal".into(), "tilt_recovery".into()), ("tilt_recovery".into(), "nominal".into())]
    );
}

#[test]
fn tilt_with_empty_history_stops() {
    let mut m = BehaviorMachine::new(BehaviorConfig::default());
    let mut inp = BehaviorInputs::at(0.0, 0.1, [0.0; 3]);
    inp.pitch = 0.6;
    assert_eq!(m.step(&inp), BehaviorCommand::Stop);
    assert_eq!(m.mode(), Mode::EmergencyStop);
}

#[test]
fn wiggle_after_window_then_stuck() {
    let cfg = WiggleConfig::default();
    let mut mon = WiggleMonitor::default();
    let mut first = None;
    for k in 1..=100 {
        if matches!(mon.check(true, 0.0, [0.0, 0.0], 0.1, &cfg), WiggleDecision::Wiggle(_)) {
            first = Some(k as f64 * 0.1);
            break;
        }
    }
    assert!((first.unwrap() - 5.0).abs() < 1e-9);
    assert!(matches!(mon.check(false, 0.0, [0.0, 0.0], 0.1, &cfg), WiggleDecision::None));

    let mut mon = WiggleMonitor::default();
    let mut stuck = false;
    for attempt in 0..3 {
        loop {
            if let WiggleDecision::Wiggle(_) = mon.check(true, 0.0, [0.0, 0.0], 0.1, &cfg) {
                break;
            }
        }
        stuck = mon.finish([0.05, 0.0], &cfg);
        assert_eq!(stuck, attempt == 2);
    }
    assert!(stuck);
}

#[test]
fn successful_wiggle_resets_the_counter() {
    let cfg = WiggleConfig::default();
    let mut mon = WiggleMonitor::default();
    for _ in 0..2 {
        while !matches!(mon.check(true, 0.0, [0.0, 0.0], 0.1, &cfg), WiggleDecision::Wiggle(_)) {}
        mon.finish([0.0, 0.0], &cfg);
    }
    assert_eq!(mon.failures, 2);
    while !matches!(mon.check(true, 0.0, [0.0, 0.0], 0.1, &cfg), WiggleDecision::Wiggle(_)) {}
    assert!(!mon.finish([1.0, 0.0], &cfg));
    assert_eq!(mon.failures, 0);
}

#[test]
fn figure_eight_is_bounded_and_closed() {
    for (v, w) in [(0.3, 1.0), (0.2, 0.7), (0.5, 2.0)] {
        let cmds = figure_eight(v, w, 0.1);
        let path = integrate_unicycle([0.0, 0.0, 0.0], &cmds, 0.1);
        let r = v / (std::f64::consts::TAU / ((cmds.len() / 2) as f64 * 0.1));
        for p in &path {
            assert!(p[0].abs() <= r + 1e-9 && p[1].abs() <= 2.0 * r + 1e-9);
        }
        let end = path.last().unwrap();
        assert!(end[0].hypot(end[1]) < 1e-9);
        // both lobes are visited
        assert!(path.iter().any(|p| p[1] > 1.5 * r) && path.iter().any(|p| p[1] < -1.5 * r));
    }
}

/// Robot stuck in the field scenario: a wiggle that goes nowhere three times
/// ends the mission.
#[test]
fn machine_declares_stuck_after_failed_wiggles() {
    let mut m = BehaviorMachine::new(BehaviorConfig::default());
    let mut wiggles = 0;
    let mut t = 0.0;
    let mut pending = false;
    for _ in 0..2000 {
        let mut inp = BehaviorInputs::at(t, 0.1, [1.0, 1.0, 0.0]);
        inp.commanded = true;
        inp.action_done = pending;
        match m.step(&inp) {
            BehaviorCommand::Wiggle(_) => {
                wiggles += 1;
                pending = true;
            }
            BehaviorCommand::Stop => break,
            BehaviorCommand::Nominal { .. } => pending = false,
            _ => {}
        }
        t += 0.1;
    }
    assert_eq!(wiggles, 3);
    assert_eq!(m.mode(), Mode::EmergencyStop);
    assert!(m.state().mission_ended);
    assert_eq!(m.events().last().unwrap().trigger, "stuck");
}

#[test]
fn escape_from_inside_a_lethal_blob() {
    let (w, h) = (15, 15);
    let mut lethal = vec![false; w * h];
    for iy in 0..h {
        for ix in 0..w {
            if (3..=11).contains(&ix) && (3..=11).contains(&iy) {
                lethal[iy * w + ix] = true;
            }
        }
    }
    let map = lethal_map(w, h, &lethal);
    // robot on the edge cell: the adjacent outside cell, one crossing
    let goal = escape_goal(&map, [11.5, 7.5]).unwrap();
    assert_eq!((goal.cell, goal.crossings), ((12, 7), 1));
    assert!((goal.distance - 1.0).abs() < 1e-12);
    // one cell deeper
    let goal = escape_goal(&map, [10.5, 7.5]).unwrap();
    assert_eq!((goal.cell, goal.crossings), ((12, 7), 2));
}

#[test]
fn equidistant_goals_break_on_crossings() {
    // everything lethal except two cells 5 away from the robot: straight along x
    // (four cells in between) and along (3, 4) (three cells in between)
    let (w, h) = (11, 11);
    let mut lethal = vec![true; w * h];
    lethal[2 * w + 7] = false;
    lethal[6 * w + 5] = false;
    let map = lethal_map(w, h, &lethal);
    let goal = escape_goal(&map, [2.5, 2.5]).unwrap();
    assert_eq!((goal.cell, goal.crossings), ((5, 6), 4));
    assert!((goal.distance - 5.0).abs() < 1e-12);
}

#[test]
fn full_ties_go_to_the_lower_index() {
    let mut lethal = vec![true; 9 * 3];
    lethal[9 + 2] = false;
    lethal[9 + 6] = false;
    let map = lethal_map(9, 3, &lethal);
    let goal = escape_goal(&map, [4.5, 1.5]).unwrap();
    assert_eq!((goal.cell, goal.crossings), ((2, 1), 2));
}

fn exhaustive_goal(map: &CvarMap, src: (usize, usize)) -> Option<((usize, usize), usize)> {
    let g = map.geometry();
    let c0 = g.center(src.0, src.1);
    let mut all: Vec<(usize, f64, usize)> = (0..g.len())
        .filter(|&i| !map.is_lethal(i))
        .map(|i| {
            let cell = g.cell_of_index(i);
            let c = g.center(cell.0, cell.1);
            let crossings = line_cells(src, cell)
                .iter()
                .filter(|&&x| x != cell && map.is_lethal(g.index(x.0, x.1)))
                .count();
            (crossings, (c[0] - c0[0]).hypot(c[1] - c0[1]), i)
        })
        .collect();
    all.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    all.first().map(|&(c, _, i)| (g.cell_of_index(i), c))
}

#[test]
fn escape_goal_is_lexicographically_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for trial in 0..60 {
        let (w, h) = (rng.random_range(2..=50), rng.random_range(2..=50));
        let share = rng.random_range(0.2..0.95);
        let lethal: Vec<bool> = (0..w * h).map(|_| rng.random_bool(share)).collect();
        let map = lethal_map(w, h, &lethal);
        let src = (rng.random_range(0..w), rng.random_range(0..h));
        let robot = map.geometry().center(src.0, src.1);
        match (escape_goal(&map, robot), exhaustive_goal(&map, src)) {
            (Ok(g), Some((cell, crossings))) => assert_eq!((g.cell, g.crossings), (cell, crossings), "trial {trial}"),
            (Err(EscapeFailure::NoSafeCell), None) => {}
            (a, b) => panic!("trial {trial}: {a:?} vs {b:?}"),
        }
    }
    let map = lethal_map(3, 3, &[true; 9]);
    assert_eq!(escape_goal(&map, [1.5, 1.5]), Err(EscapeFailure::NoSafeCell));
}

#[test]
fn relaxation_schedule_stops_early() {
    let mut lethal = vec![true; 25];
    lethal[0] = false;
    let map = lethal_map(5, 5, &lethal);
    let cfg = EscapeConfig::default();
    let mut calls = 0;
    let plan = escape_lethal(&map, [2.5, 2.5], &cfg, |_, _| {
        calls += 1;
        true
    })
    .unwrap();
    assert_eq!((plan.schedule.len(), calls), (1, 1));
    assert!(plan.schedule[0] > map.rho_max());
    let plan = escape_lethal(&map, [2.5, 2.5], &cfg, |m, _| m.rho_max() > 1.6).unwrap();
    assert!(plan.schedule.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(plan.schedule.len(), 3);
    assert_eq!(
        escape_lethal(&map, [2.5, 2.5], &cfg, |_, _| false),
        Err(EscapeFailure::Unreachable)
    );
}

/// The robot ends up on a cell that became lethal. After the dwell time the
/// machine plans an escape and the robot drives out along the straight line.
#[test]
fn escape_scenario_ends_on_a_safe_cell() {
    let (w, h) = (20, 20);
    let mut lethal = vec![false; w * h];
    for iy in 5..12 {
        for ix in 4..14 {
            lethal[iy * w + ix] = true;
        }
    }
    let map = lethal_map(w, h, &lethal);
    let mut cfg = BehaviorConfig::default();
    cfg.astar.lambda = 0.01;
    let mut m = BehaviorMachine::new(cfg);
    let mut pos = [9.5, 8.5];
    let dt = 0.1;
    let mut target: Option<[f64; 2]> = None;
    let mut escaped = false;
    for k in 0..300 {
        let mut inp = BehaviorInputs::at(k as f64 * dt, dt, [pos[0], pos[1], 0.0]);
        inp.cvar = Some(&map);
        inp.commanded = true;
        inp.speed = 0.3;
        inp.action_done = target.is_some_and(|t| (t[0] - pos[0]).hypot(t[1] - pos[1]) < 1e-9);
        match m.step(&inp) {
            BehaviorCommand::Escape(plan) => {
                assert!((k + 1) as f64 * dt + 1e-9 >= cfg.escape.dwell_time);
                target = Some(plan.goal.position);
            }
            BehaviorCommand::Hold => {
                let t = target.unwrap();
                let (dx, dy) = (t[0] - pos[0], t[1] - pos[1]);
                let d = dx.hypot(dy);
                let s = (0.3 * dt).min(d);
                if d > 0.0 {
                    pos = [pos[0] + dx / d * s, pos[1] + dy / d * s];
                }
            }
            BehaviorCommand::Nominal { .. } if target.is_some() => {
                escaped = true;
                break;
            }
            BehaviorCommand::Nominal { .. } => {}
            other => panic!("unexpected {other:?}"),
        }
    }
    assert!(escaped);
    let g = map.geometry();
    let (ix, iy) = g.cell_at(pos[0], pos[1]).unwrap();
    assert!(!map.is_lethal(g.index(ix, iy)));
    let triggers: Vec<&str> = m.events().iter().map(|e| e.trigger.as_str()).collect();
    assert_eq!(triggers, vec!["lethal_dwell", "escaped"]);
}

#[test]
fn gait_thresholds_and_priority() {
    let cfg = GaitConfig::default();
    assert_eq!(gait_select(Some(0.10), 0.0, false, &cfg), Gait::Crouch);
    assert_eq!(gait_select(Some(0.16), 0.0, false, &cfg), Gait::Crouch);
    assert_eq!(gait_select(Some(0.17), 0.0, false, &cfg), Gait::Walk);
    assert_eq!(gait_select(Some(-0.2), 0.0, false, &cfg), Gait::Walk);
    assert_eq!(gait_select(None, 0.6, false, &cfg), Gait::Crawl);
    assert_eq!(gait_select(None, 0.5, false, &cfg), Gait::Walk);
    assert_eq!(gait_select(Some(0.1), 0.6, false, &cfg), Gait::Crawl);
    assert_eq!(gait_select(Some(0.1), 0.6, true, &cfg), Gait::Stair);
    assert_eq!(gait_select(None, 0.0, false, &cfg), Gait::Walk);
}

#[test]
fn gait_changes_are_logged_and_revert_to_walk() {
    let mut m = BehaviorMachine::new(BehaviorConfig::default());
    let script = [(None, 0.0, false), (Some(0.5), 0.0, false), (None, 0.7, false), (None, 0.7, true), (None, 0.0, false)];
    for (k, (ceiling, slip, stair)) in script.into_iter().enumerate() {
        let mut inp = BehaviorInputs::at(k as f64, 0.1, [0.0; 3]);
        inp.ceiling_height = ceiling;
        inp.p_slip = slip;
        inp.stair = stair;
        m.step(&inp);
    }
    let gaits: Vec<&str> = m.events().iter().filter(|e| e.kind == "gait").map(|e| e.to.as_str()).collect();
    assert_eq!(gaits, vec!["crouch", "crawl", "stair", "walk"]);
    assert_eq!(m.state().gait, Gait::Walk);
}

#[test]
fn events_round_trip_through_jsonl() {
    let events = vec![
        BehaviorEvent { t: 1.5, kind: "mode".into(), from: "nominal".into(), to: "wiggle".into(), trigger: "stationary".into() },
        BehaviorEvent { t: 2.0, kind: "gait".into(), from: "walk".into(), to: "crawl".into(), trigger: "slip".into() },
    ];
    let mut buf = Vec::new();
    write_events_jsonl(&events, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let back: Vec<BehaviorEvent> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(back, events);
}

#[derive(Debug, Clone)]
struct Event {
    pitch: f64,
    speed: f64,
    commanded: bool,
    feasible: bool,
    lethal: bool,
    done: bool,
    resume: bool,
}

fn event() -> impl Strategy<Value = Event> {
    (
        prop_oneof![Just(0.0), Just(0.3), Just(0.5), -0.6f64..0.6],
        prop_oneof![Just(0.0), 0.0f64..1.0],
        any::<bool>(),
        any::<bool>(),
        prop::bool::weighted(0.2),
        any::<bool>(),
        prop::bool::weighted(0.3),
    )
        .prop_map(|(pitch, speed, commanded, feasible, lethal, done, resume)| Event {
            pitch,
            speed,
            commanded,
            feasible,
            lethal,
            done,
            resume,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn mode_machine_follows_its_transition_table(events in prop::collection::vec(event(), 1..300)) {
        let lethal_all: Vec<bool> = (0..100).map(|i| i % 10 > 4).collect();
        let lethal_map = lethal_map(10, 10, &lethal_all);
        let mut cfg = BehaviorConfig::default();
        cfg.wiggle.window = 0.5;
        cfg.escape.dwell_time = 0.2;
        let mut m = BehaviorMachine::new(cfg);
        let mut seen = std::collections::HashSet::new();
        for (k, e) in events.iter().enumerate() {
            let mut inp = BehaviorInputs::at(k as f64 * 0.1, 0.1, [7.5, 3.5, 0.0]);
            inp.pitch = e.pitch;
            inp.speed = e.speed;
            inp.commanded = e.commanded;
            inp.plan_feasible = e.feasible;
            inp.cvar = e.lethal.then_some(&lethal_map);
            inp.action_done = e.done;
            inp.resume = e.resume;
            let before = m.mode();
            let cmd = m.step(&inp);
            seen.insert(m.mode());
            let a = m.state().alpha_current;
            prop_assert!(a > 0.0 && a < 1.0);
            if before == Mode::EmergencyStop && m.mode() != Mode::EmergencyStop {
                prop_assert!(e.resume && e.pitch.abs() <= cfg.tilt.pitch_limit);
            }
            if m.mode() == Mode::EmergencyStop {
                prop_assert_eq!(cmd, BehaviorCommand::Stop);
            }
        }
        let mut prev = Mode::Nominal;
        for ev in m.events().iter().filter(|e| e.kind == "mode") {
            prop_assert_eq!(ev.from.as_str(), prev.name());
            let to = [Mode::Nominal, Mode::TiltRecovery, Mode::Wiggle, Mode::EscapeLethal, Mode::EmergencyStop]
                .into_iter()
                .find(|m| m.name() == ev.to)
                .unwrap();
            prop_assert!(prev.can_enter(to), "{:?} -> {:?}", prev, to);
            prev = to;
        }
        prop_assert_eq!(prev, m.mode());
        // every state drains back to nominal under calm inputs
        for k in 0..3 {
            if m.mode() == Mode::Nominal {
                break;
            }
            let mut inp = BehaviorInputs::at(1e3 + k as f64, 0.1, [0.5, 0.5, 0.0]);
            inp.action_done = true;
            inp.resume = true;
            inp.speed = 1.0;
            inp.commanded = true;
            m.step(&inp);
        }
        prop_assert_eq!(m.mode(), Mode::Nominal);
    }
}

#[test]
fn every_mode_is_reachable() {
    let mut cfg = BehaviorConfig::default();
    cfg.wiggle.window = 0.3;
    let lethal: Vec<bool> = (0..100).map(|i| i % 10 > 4).collect();
    let map = lethal_map(10, 10, &lethal);
    let mut m = BehaviorMachine::new(cfg);
    let mut t = 0.0;
    fn step<'a>(m: &mut BehaviorMachine, t: &mut f64, f: &dyn Fn(&mut BehaviorInputs<'a>)) -> BehaviorCommand {
        let mut inp = BehaviorInputs::at(*t, 0.1, [2.5, 2.5, 0.0]);
        f(&mut inp);
        *t += 0.1;
        m.step(&inp)
    }
    step(&mut m, &mut t, &|_| {});
    step(&mut m, &mut t, &|i| i.pitch = 0.5);
    assert_eq!(m.mode(), Mode::TiltRecovery);
    step(&mut m, &mut t, &|_| {});
    for _ in 0..4 {
        step(&mut m, &mut t, &|i| i.commanded = true);
    }
    assert_eq!(m.mode(), Mode::Wiggle);
    step(&mut m, &mut t, &|i| i.action_done = true);
    assert_eq!(m.mode(), Mode::Nominal);
    for _ in 0..11 {
        step(&mut m, &mut t, &|i| {
            i.cvar = Some(&map);
            i.pose = [7.5, 2.5, 0.0];
        });
    }
    assert_eq!(m.mode(), Mode::EscapeLethal);
    step(&mut m, &mut t, &|i| {
        i.cvar = Some(&map);
        i.pose = [7.5, 2.5, 0.0];
        i.action_done = true;
    });
    assert_eq!(m.mode(), Mode::EmergencyStop);
    step(&mut m, &mut t, &|i| i.resume = true);
    assert_eq!(m.mode(), Mode::Nominal);
}
