//! Paired Monte Carlo comparison of risk levels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::episode::{run_episode, EpisodeRecord, EpisodeTrace};
use crate::stats::{box_stats, sign_test_less, BoxStats, SignTest};
use crate::world::gen_world;
use crate::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub runs: usize,
    pub alphas: Vec<f64>,
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSummary {
    pub alpha: f64,
    pub successes: usize,
    pub path_length: Option<BoxStats>,
    pub max_risk: Option<BoxStats>,
    pub j_pos: Option<BoxStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub metric: String,
    pub alpha_a: f64,
    pub alpha_b: f64,
    pub test: SignTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub study: Study,
    pub summaries: Vec<AlphaSummary>,
    pub tests: Vec<PairedTest>,
    /// One record per (run, alpha), runs outer.
    #[serde(default)]
    pub episodes: Vec<EpisodeRecord>,
    #[serde(skip)]
    pub traces: Vec<EpisodeTrace>,
}

impl StudyResult {
    pub fn records_for(&self, alpha: f64) -> impl Iterator<Item = &EpisodeRecord> {
        self.episodes.iter().filter(move |r| r.alpha == alpha)
    }

    fn metric(&self, alpha: f64, f: fn(&EpisodeRecord) -> f64) -> Vec<f64> {
        self.records_for(alpha).map(f).collect()
    }
}

/// Runs `runs` worlds, each with every α in `alphas`. World `i` uses seed
/// `base_seed + i`, so the α values are compared on identical terrain.
pub fn monte_carlo(cfg: &SimConfig, runs: usize, alphas: &[f64], base_seed: u64) -> Result<StudyResult, SimError> {
    let jobs: Vec<(usize, f64)> = (0..runs).flat_map(|i| alphas.iter().map(move |&a| (i, a))).collect();
    let out: Vec<(EpisodeRecord, EpisodeTrace)> = jobs
        .par_iter()
        .map(|&(i, alpha)| {
            let seed = base_seed + i as u64;
            let world = gen_world(&crate::world::WorldSpec { seed, ..cfg.world.clone() })?;
            run_episode(&world, world.start, world.goal, alpha, cfg, seed)
        })
        .collect::<Result<_, _>>()?;
    let (episodes, traces): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    let mut res = StudyResult {
        study: Study { runs, alphas: alphas.to_vec(), base_seed },
        summaries: Vec::new(),
        tests: Vec::new(),
        episodes,
        traces,
    };
    res.summaries = alphas
        .iter()
        .map(|&a| AlphaSummary {
            alpha: a,
            successes: res.records_for(a).filter(|r| r.success).count(),
            path_length: box_stats(&res.metric(a, |r| r.path_length)),
            max_risk: box_stats(&res.metric(a, |r| r.max_risk)),
            j_pos: box_stats(&res.metric(a, |r| r.j_pos)),
        })
        .collect();
    let mut sorted = alphas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut pairs: Vec<(f64, f64)> = sorted.windows(2).map(|w| (w[0], w[1])).collect();
    if sorted.len() > 2 {
        pairs.push((sorted[0], sorted[sorted.len() - 1]));
    }
    for (lo, hi) in pairs {
        // low α should take riskier, shorter paths
        res.tests.push(PairedTest {
            metric: "path_length".into(),
            alpha_a: lo,
            alpha_b: hi,
            test: sign_test_less(&res.metric(lo, |r| r.path_length), &res.metric(hi, |r| r.path_length)),
        });
        res.tests.push(PairedTest {
            metric: "max_risk".into(),
            alpha_a: hi,
            alpha_b: lo,
            test: sign_test_less(&res.metric(hi, |r| r.max_risk), &res.metric(lo, |r| r.max_risk)),
        });
    }
    Ok(res)
}
