use std::path::Path;
use std::process::Command;

use step_qp::{CsrMatrix, QpProblem};
use step_sim::{gen_world, SimConfig};

fn step(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_step")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "step {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn shipped_config_is_the_default() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    let cfg = SimConfig::load(&path).unwrap();
    assert_eq!(cfg, SimConfig::default());
    let printed = String::from_utf8(step(&["config", "default"]).stdout).unwrap();
    assert_eq!(SimConfig::from_toml_str(&printed).unwrap(), cfg);
}

#[test]
fn qp_solve_prints_the_optimum() {
    // min ½(x² + y²) - x - y  s.t.  x + y ≤ 1
    let prob = QpProblem::new(
        CsrMatrix::identity(2),
        vec![-1.0, -1.0],
        CsrMatrix::from_dense(1, 2, &[1.0, 1.0]),
        vec![f64::NEG_INFINITY],
        vec![1.0],
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("p.txt");
    let mut buf = Vec::new();
    prob.write_text(&mut buf).unwrap();
    std::fs::write(&file, buf).unwrap();
    let out = String::from_utf8(step(&["qp", "solve", s(&file), "--eps-abs", "1e-9", "--eps-rel", "0"]).stdout).unwrap();
    assert!(out.contains("status Solved"), "{out}");
    let x: Vec<f64> = out
        .lines()
        .find_map(|l| l.strip_prefix("x "))
        .unwrap()
        .split_whitespace()
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((x[0] - 0.5).abs() < 1e-6 && (x[1] - 0.5).abs() < 1e-6, "{x:?}");
}

#[test]
fn map_then_geometric_and_mpc_plans() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("map.json");
    step(&["map", "build", "--seed", "3", "--out", s(&snap)]);
    let mut spec = SimConfig::default().world;
    spec.seed = 3;
    let w = gen_world(&spec).unwrap();
    let path = dir.path().join("path.csv");
    let (sx, sy, gx, gy) = (w.start[0].to_string(), w.start[1].to_string(), w.goal[0].to_string(), w.goal[1].to_string());
    step(&["plan", "geo", "--map", s(&snap), "--start", &sx, &sy, "--goal", &gx, &gy, "--out", s(&path)]);
    let rows = std::fs::read_to_string(&path).unwrap();
    assert_eq!(rows.lines().next(), Some("x,y,cvar"));
    assert!(rows.lines().count() > 10);

    let traj = dir.path().join("traj.csv");
    step(&["plan", "mpc", "--map", s(&snap), "--path", s(&path), "--out", s(&traj)]);
    let t = std::fs::read_to_string(&traj).unwrap();
    assert!(t.starts_with("t,x,y,theta"));
    assert_eq!(t.lines().count(), 1 + SimConfig::default().mpc.horizon + 1);
}

#[test]
fn one_run_study_and_plotdata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("study");
    let text = String::from_utf8(step(&["sim", "run", "--runs", "1", "--alpha", "0.5", "--seed", "5", "--out", s(&out)]).stdout).unwrap();
    assert!(text.contains("alpha 0.5"), "{text}");
    let plot = dir.path().join("plot.csv");
    step(&["sim", "plotdata", s(&out.join("study.json")), "--out", s(&plot)]);
    let rows = std::fs::read_to_string(&plot).unwrap();
    assert!(rows.lines().count() >= 3, "{rows}");
}

#[test]
fn bad_arguments_fail() {
    let out = Command::new(env!("CARGO_BIN_EXE_step")).args(["sim", "run", "--runs", "0", "--out", "/nonexistent"]).output().unwrap();
    assert!(!out.status.success());
}
