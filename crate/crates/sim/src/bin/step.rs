use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use step_core::grid::BeliefGridMap;
use step_core::mpc::{plan_mpc, MpcConfig, MpcMemory, RobotState6};
use step_core::planner::plan_astar;
use step_core::riskmap::{surface_normals, CvarMap};
use step_qp::{solve_qp, AdmmSettings, QpProblem};
use step_sim::episode::belief_geometry;
use step_sim::io::{write_plotdata, write_study};
use step_sim::{gen_world, monte_carlo, sensor_model, Belief, SensorFrame, SimConfig, StudyResult};

#[derive(Parser)]
#[command(name = "step", version, about = "Risk-aware traversability mapping, planning and simulation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Risk map construction.
    Map {
        #[command(subcommand)]
        cmd: MapCmd,
    },
    /// Geometric and kinodynamic planning on a map snapshot.
    Plan {
        #[command(subcommand)]
        cmd: PlanCmd,
    },
    /// Standalone QP solves.
    Qp {
        #[command(subcommand)]
        cmd: QpCmd,
    },
    /// Closed-loop simulation.
    Sim {
        #[command(subcommand)]
        cmd: SimCmd,
    },
    /// Configuration helpers.
    Config {
        #[command(subcommand)]
        cmd: ConfigCmd,
    },
}

#[derive(Subcommand)]
enum MapCmd {
    /// Generates a world, sweeps the sensor along the start-goal segment and
    /// writes the resulting belief with CVaR layers as a snapshot.
    Build {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0.9)]
        alpha: f64,
        /// Overrides the world seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Distance between sweeps along the segment (m).
        #[arg(long, default_value_t = 2.0)]
        spacing: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum PlanCmd {
    /// A* on a snapshot; writes `x,y,cvar` rows.
    Geo {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, num_args = 2, allow_negative_numbers = true)]
        start: Vec<f64>,
        #[arg(long, num_args = 2, allow_negative_numbers = true)]
        goal: Vec<f64>,
        #[arg(long, default_value_t = 0.9)]
        alpha: f64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One MPC planning cycle along a geometric path CSV.
    Mpc {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        path: PathBuf,
        /// Initial heading (rad); position is the first path point.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long, default_value_t = 0.9)]
        alpha: f64,
        /// TOML file with MPC settings (the `[mpc]` table of a sim config).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum QpCmd {
    /// Solves a problem in the text format and prints status, objective and x.
    Solve {
        problem: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        eps_abs: f64,
        #[arg(long, default_value_t = 1e-6)]
        eps_rel: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        #[arg(long)]
        adaptive_rho: bool,
    },
}

#[derive(Subcommand)]
enum SimCmd {
    /// Paired Monte Carlo study.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.5,0.95")]
        alpha: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Box-plot quartile table from a `study.json`.
    Plotdata {
        study: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ConfigCmd {
    /// Prints the default configuration.
    Default,
}

fn load_config(path: Option<&Path>) -> Result<SimConfig> {
    Ok(match path {
        Some(p) => SimConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => SimConfig::default(),
    })
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn read_snapshot(path: &Path, alpha: f64, cfg: &SimConfig) -> Result<(BeliefGridMap, CvarMap)> {
    let map = BeliefGridMap::read_snapshot(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))?;
    let cvar = CvarMap::from_layers(&map, alpha, cfg.risk.lethal_threshold)?;
    Ok((map, cvar))
}

fn map_build(cfg: &SimConfig, alpha: f64, spacing: f64, out: &Path) -> Result<()> {
    let world = gen_world(&cfg.world)?;
    let geometry = belief_geometry(&world, world.start, world.goal, cfg.episode.map_margin);
    let frame = SensorFrame::new(&world, geometry);
    let mut belief = Belief::new(geometry);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.world.seed);
    let (s, g) = (world.start, world.goal);
    let n = ((g[0] - s[0]).hypot(g[1] - s[1]) / spacing.max(1e-3)).ceil() as usize;
    for k in 0..=n {
        let t = k as f64 / n.max(1) as f64;
        let p = [s[0] + t * (g[0] - s[0]), s[1] + t * (g[1] - s[1])];
        belief.integrate(&sensor_model(&world, &frame, p, &cfg.sensor, &mut rng), &cfg.risk)?;
    }
    let (cvar, normals) = belief.cvar(alpha, &cfg.risk)?;
    let mut map = belief.map.clone();
    cvar.write_layers(&mut map)?;
    normals.write_layers(&mut map)?;
    map.write_snapshot(BufWriter::new(File::create(out)?))?;
    eprintln!(
        "start {:.3} {:.3}  goal {:.3} {:.3}  grid {}x{}",
        s[0], s[1], g[0], g[1], geometry.width, geometry.height
    );
    Ok(())
}

fn read_path_csv(path: &Path) -> Result<Vec<[f64; 2]>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut pts = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let x: f64 = rec.get(0).context("missing x")?.trim().parse()?;
        let y: f64 = rec.get(1).context("missing y")?.trim().parse()?;
        pts.push([x, y]);
    }
    if pts.is_empty() {
        bail!("{} has no waypoints", path.display());
    }
    Ok(pts)
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Map { cmd: MapCmd::Build { config, alpha, seed, spacing, out } } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.world.seed = s;
            }
            map_build(&cfg, alpha, spacing, &out)?;
        }
        Cmd::Plan { cmd: PlanCmd::Geo { map, start, goal, alpha, config, out } } => {
            let cfg = load_config(config.as_deref())?;
            let (_, cvar) = read_snapshot(&map, alpha, &cfg)?;
            let path = plan_astar(&cvar, [start[0], start[1]], [goal[0], goal[1]], &cfg.astar)
                .map_err(|e| anyhow::anyhow!("no path: {e}"))?;
            let mut w = csv::Writer::from_writer(output(out.as_deref())?);
            w.write_record(["x", "y", "cvar"])?;
            for (p, c) in path.waypoints.iter().zip(&path.cells) {
                let idx = cvar.geometry().index(c.0, c.1);
                w.write_record([p[0].to_string(), p[1].to_string(), cvar.cvar(idx).to_string()])?;
            }
            w.flush()?;
            eprintln!("length {:.4} m  risk {:.6}", path.total_length, path.total_risk_cost);
        }
        Cmd::Plan { cmd: PlanCmd::Mpc { map, path, theta, alpha, config, out } } => {
            let mpc: MpcConfig = match &config {
                Some(p) => toml::from_str(&std::fs::read_to_string(p)?)?,
                None => SimConfig::default().mpc,
            };
            let (belief, cvar) = read_snapshot(&map, alpha, &SimConfig::default())?;
            let normals = surface_normals(&belief, SimConfig::default().risk.normal_radius)?;
            let waypoints = read_path_csv(&path)?;
            let x0 = RobotState6::new(waypoints[0][0], waypoints[0][1], theta);
            let res = plan_mpc(&x0, &MpcMemory::default(), &waypoints, &cvar, Some(&normals), &mpc);
            let t = &res.trajectory;
            let mut w = csv::Writer::from_writer(output(out.as_deref())?);
            w.write_record(["t", "x", "y", "theta", "vx", "vy", "vtheta", "ax", "ay", "atheta", "cvar"])?;
            for (k, s) in t.states.iter().enumerate() {
                let u = t.controls.get(k).map(|u| u.0).unwrap_or([0.0; 3]);
                let c = t.step_cvar.get(k).copied().unwrap_or_else(|| cvar.at(s.px, s.py));
                let row = [k as f64 * t.dt, s.px, s.py, s.theta, s.vx, s.vy, s.vtheta, u[0], u[1], u[2], c];
                w.write_record(row.iter().map(|v| v.to_string()))?;
            }
            w.flush()?;
            eprintln!("status {:?}  cost {:.6}", res.status, res.cost);
        }
        Cmd::Qp { cmd: QpCmd::Solve { problem, eps_abs, eps_rel, max_iter, adaptive_rho } } => {
            let prob = QpProblem::read_text(BufReader::new(File::open(&problem)?))?;
            let settings = AdmmSettings::default()
                .with_tolerances(eps_abs, eps_rel)
                .with_max_iter(max_iter)
                .with_adaptive_rho(adaptive_rho);
            let sol = solve_qp(&prob, &settings, None)?;
            println!("status {:?}", sol.status);
            println!("iterations {}", sol.iterations);
            println!("objective {}", sol.objective);
            println!("x {}", sol.x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "));
            println!("y {}", sol.y.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "));
        }
        Cmd::Sim { cmd: SimCmd::Run { config, alpha, runs, seed, out } } => {
            let cfg = load_config(config.as_deref())?;
            if runs == 0 {
                bail!("--runs must be at least 1");
            }
            let res = monte_carlo(&cfg, runs, &alpha, seed)?;
            write_study(&res, &out)?;
            for s in &res.summaries {
                let med = |b: &Option<step_sim::stats::BoxStats>| b.as_ref().map(|b| b.median).unwrap_or(f64::NAN);
                println!(
                    "alpha {:<5} success {:>3}/{}  median length {:.3} m  median max risk {:.4}",
                    s.alpha,
                    s.successes,
                    runs,
                    med(&s.path_length),
                    med(&s.max_risk)
                );
            }
            for t in &res.tests {
                println!(
                    "{} {} < {}: {} of {} pairs, p = {:.3e}",
                    t.metric,
                    t.alpha_a,
                    t.alpha_b,
                    t.test.below,
                    t.test.below + t.test.above,
                    t.test.p_value
                );
            }
        }
        Cmd::Sim { cmd: SimCmd::Plotdata { study, out } } => {
            let res: StudyResult = serde_json::from_reader(BufReader::new(File::open(&study)?))?;
            write_plotdata(&res, output(out.as_deref())?)?;
        }
        Cmd::Config { cmd: ConfigCmd::Default } => {
            print!("{}", SimConfig::default().to_toml_string()?);
        }
    }
    Ok(())
}
