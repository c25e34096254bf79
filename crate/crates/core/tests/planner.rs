use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use step_core::cvar::cvar_gaussian;
use step_core::grid::GridGeometry;
use step_core::planner::{path_risk, path_risk_cells, plan_astar_cells, AstarConfig, LengthCost};
use step_core::riskmap::{CellRisk, CvarMap};
use step_oracles::graph::dijkstra;
use step_oracles::risk::nested_compounded_risk;

fn random_cells(rng: &mut ChaCha8Rng, n: usize, lethal_share: f64) -> Vec<CellRisk> {
    (0..n)
        .map(|_| {
            if rng.random_bool(lethal_share) {
                CellRisk { mu: 2.0, sigma: 0.5 }
            } else {
                CellRisk { mu: rng.random_range(0.0..0.3), sigma: rng.random_range(0.0..0.2) }
            }
        })
        .collect()
}

fn dijkstra_cost(map: &CvarMap, s: usize, t: usize, cfg: &AstarConfig) -> f64 {
    let g = *map.geometry();
    let dist = dijkstra(g.len(), s, |v| {
        if map.is_lethal(v) {
            return Vec::new();
        }
        let (ix, iy) = g.cell_of_index(v);
        g.neighbors8(ix, iy)
            .filter(|&(nx, ny)| !map.is_lethal(g.index(nx, ny)))
            .map(|(nx, ny)| {
                let len = (((nx as f64 - ix as f64).powi(2) + (ny as f64 - iy as f64).powi(2)).sqrt()) * g.resolution;
                let step = match cfg.length_cost {
                    LengthCost::Squared => cfg.lambda * len * len,
                    LengthCost::Euclidean => cfg.lambda * len,
                };
                (g.index(nx, ny), map.cvar(g.index(nx, ny)) + step)
            })
            .collect()
    });
    map.mean(s) + dist[t]
}

#[test]
fn astar_matches_dijkstra_on_random_maps() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = GridGeometry::new([0.0, 0.0], 0.2, 20, 20).unwrap();
    let mut solved = 0;
    for trial in 0..200 {
        let cells = random_cells(&mut rng, g.len(), 0.25);
        let alpha = rng.random_range(0.05..0.95);
        let map = CvarMap::from_cells(g, &cells, alpha, 1.0).unwrap();
        let cfg = AstarConfig {
            lambda: rng.random_range(0.0..1.0),
            length_cost: if trial % 2 == 0 { LengthCost::Squared } else { LengthCost::Euclidean },
            ..AstarConfig::default()
        };
        let free: Vec<usize> = (0..g.len()).filter(|&i| !map.is_lethal(i)).collect();
        let s = free[rng.random_range(0..free.len())];
        let t = free[rng.random_range(0..free.len())];
        let want = dijkstra_cost(&map, s, t, &cfg);
        match plan_astar_cells(&map, g.cell_of_index(s), g.cell_of_index(t), &cfg) {
            Ok(p) => {
                solved += 1;
                assert!((p.total_cost - want).abs() <= 1e-9, "trial {trial}: {} vs {want}", p.total_cost);
                for c in &p.cells {
                    assert!(!map.is_lethal(g.index(c.0, c.1)), "trial {trial} enters a lethal cell");
                }
                for w in p.cells.windows(2) {
                    let d = (w[0].0.abs_diff(w[1].0), w[0].1.abs_diff(w[1].1));
                    assert!(d.0 <= 1 && d.1 <= 1 && d != (0, 0));
                }
            }
            Err(_) => assert!(want.is_infinite(), "trial {trial}: A* failed, oracle {want}"),
        }
    }
    assert!(solved > 150);
}

#[test]
fn compounded_risk_equals_nested_recursion() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let len = rng.random_range(1..40);
        let alpha = rng.random_range(0.01..0.99);
        let cells: Vec<(f64, f64)> =
            (0..len).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0))).collect();
        let g = GridGeometry::new([0.0, 0.0], 1.0, len, 1).unwrap();
        let risk: Vec<CellRisk> = cells.iter().map(|&(mu, sigma)| CellRisk { mu, sigma }).collect();
        let map = CvarMap::from_cells(g, &risk, alpha, 1e9).unwrap();
        let waypoints: Vec<[f64; 2]> = (0..len).map(|i| g.center(i, 0)).collect();
        let closed = path_risk(&map, &waypoints).unwrap();
        let nested = nested_compounded_risk(&cells, alpha);
        assert!((closed - nested).abs() <= 1e-9, "{closed} vs {nested}");
    }
}

#[test]
fn three_identical_cells() {
    let g = GridGeometry::new([0.0, 0.0], 1.0, 3, 1).unwrap();
    let map = CvarMap::from_cells(g, &[CellRisk { mu: 0.1, sigma: 0.1 }; 3], 0.9, 5.0).unwrap();
    let j = path_risk_cells(&map, &[(0, 0), (1, 0), (2, 0)]);
    // φ(Φ⁻¹(0.9)) / 0.1 = 1.7549833193248680
    assert!((j - (0.1 + 2.0 * (0.1 + 0.1 * 1.754_983_319_324_868))).abs() < 1e-12);
}

/// A 3-row corridor split by a wall with a short risky gap and a long safe way round.
fn detour_map(alpha: f64) -> CvarMap {
    let (w, h) = (15, 9);
    let g = GridGeometry::new([0.0, 0.0], 1.0, w, h).unwrap();
    let mut cells = vec![CellRisk { mu: 0.02, sigma: 0.01 }; g.len()];
    for iy in 0..h - 2 {
        cells[g.index(7, iy)] = CellRisk { mu: 10.0, sigma: 0.0 };
    }
    // the gap: cheap on average, heavy tailed
    cells[g.index(7, 1)] = CellRisk { mu: 0.05, sigma: 0.3 };
    CvarMap::from_cells(g, &cells, alpha, 1.5).unwrap()
}

#[test]
fn high_alpha_takes_the_detour() {
    let cfg = AstarConfig { lambda: 0.01, length_cost: LengthCost::Euclidean, ..AstarConfig::default() };
    let safe = plan_astar_cells(&detour_map(0.95), (3, 1), (11, 1), &cfg).unwrap();
    let bold = plan_astar_cells(&detour_map(0.05), (3, 1), (11, 1), &cfg).unwrap();
    assert!(!safe.cells.contains(&(7, 1)));
    assert!(bold.cells.contains(&(7, 1)));
    assert!(safe.total_length > bold.total_length);
}

#[test]
fn optimal_risk_is_monotone_in_alpha() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = GridGeometry::new([0.0, 0.0], 0.5, 15, 15).unwrap();
    let cfg = AstarConfig { lambda: 0.0, ..AstarConfig::default() };
    for _ in 0..30 {
        let cells = random_cells(&mut rng, g.len(), 0.1);
        let (s, t) = ((0, 0), (14, 14));
        let mut last = f64::NEG_INFINITY;
        for alpha in [0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95] {
            let mut c = cells.clone();
            c[g.index(s.0, s.1)] = CellRisk { mu: 0.0, sigma: 0.0 };
            c[g.index(t.0, t.1)] = CellRisk { mu: 0.0, sigma: 0.0 };
            let map = CvarMap::from_cells(g, &c, alpha, 1.0).unwrap();
            let Ok(p) = plan_astar_cells(&map, s, t, &cfg) else {
                last = f64::INFINITY;
                continue;
            };
            assert!(p.total_risk_cost >= last - 1e-12, "alpha {alpha}: {} < {last}", p.total_risk_cost);
            last = p.total_risk_cost;
        }
    }
}

proptest! {
    #[test]
    fn path_risk_is_at_least_the_mean_sum(
        cells in prop::collection::vec((-1.0f64..1.0, 0.0f64..1.0), 1..20),
        alpha in 0.01f64..0.99,
    ) {
        let g = GridGeometry::new([0.0, 0.0], 1.0, cells.len(), 1).unwrap();
        let risk: Vec<CellRisk> = cells.iter().map(|&(mu, sigma)| CellRisk { mu, sigma }).collect();
        let map = CvarMap::from_cells(g, &risk, alpha, 1e9).unwrap();
        let path: Vec<(usize, usize)> = (0..cells.len()).map(|i| (i, 0)).collect();
        let j = path_risk_cells(&map, &path);
        let mean_sum: f64 = cells.iter().map(|c| c.0).sum();
        prop_assert!(j >= mean_sum - 1e-12);
        let direct = cells[0].0 + cells[1..].iter().map(|c| cvar_gaussian(c.0, c.1, alpha).unwrap()).sum::<f64>();
        prop_assert!((j - direct).abs() < 1e-12);
    }
}
