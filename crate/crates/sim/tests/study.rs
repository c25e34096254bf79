use proptest::prelude::*;
use step_sim::io::write_study;
use step_sim::stats::{box_stats, sign_test_less};
use step_sim::{gen_world, monte_carlo, SimConfig, StudyResult, WorldSpec};

// Hyndman and Fan definition 8, written out directly.
fn quantile_type8(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len() as f64;
    let h = (n + 1.0 / 3.0) * p + 1.0 / 3.0;
    if h <= 1.0 {
        return sorted[0];
    }
    if h >= n {
        return sorted[sorted.len() - 1];
    }
    let lo = h.floor();
    let i = lo as usize - 1;
    sorted[i] + (h - lo) * (sorted[i + 1] - sorted[i])
}

fn binom_tail(n: u64, k: u64) -> f64 {
    let mut c = 1.0f64;
    let mut total = 0.0;
    for j in 0..=n {
        if j >= k {
            total += c;
        }
        c = c * (n - j) as f64 / (j + 1) as f64;
    }
    total / 2f64.powi(n as i32)
}

#[test]
fn single_sample_quartiles_collapse() {
    let b = box_stats(&[3.25]).unwrap();
    assert_eq!((b.n, b.min, b.q1, b.median, b.q3, b.max), (1, 3.25, 3.25, 3.25, 3.25, 3.25));
    assert!(b.outliers.is_empty());
}

#[test]
fn outliers_fall_outside_the_whiskers() {
    let mut v: Vec<f64> = (0..20).map(|i| i as f64 / 10.0).collect();
    v.push(50.0);
    let b = box_stats(&v).unwrap();
    assert_eq!(b.outliers, vec![50.0]);
    assert_eq!(b.whisker_high, 1.9);
    assert_eq!(b.whisker_low, 0.0);
}

proptest! {
    #[test]
    fn quartiles_match_the_type8_definition(mut v in prop::collection::vec(-100.0f64..100.0, 1..80)) {
        let b = box_stats(&v).unwrap();
        v.sort_by(f64::total_cmp);
        for (got, p) in [(b.q1, 0.25), (b.median, 0.5), (b.q3, 0.75)] {
            let want = quantile_type8(&v, p);
            prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "p={} {} vs {}", p, got, want);
        }
        prop_assert!(b.min <= b.whisker_low && b.whisker_low <= b.whisker_high);
        prop_assert!(b.q1 <= b.median && b.median <= b.q3);
        prop_assert!(b.whisker_high <= b.max);
        prop_assert_eq!(b.n, v.len());
    }

    #[test]
    fn sign_test_matches_the_binomial_tail(pairs in prop::collection::vec((0u8..5, 0u8..5), 0..40)) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let t = sign_test_less(&a, &b);
        prop_assert_eq!(t.below + t.above + t.ties, pairs.len());
        let n = (t.below + t.above) as u64;
        let want = if n == 0 { 1.0 } else { binom_tail(n, t.below as u64) };
        prop_assert!((t.p_value - want).abs() < 1e-12, "{} vs {}", t.p_value, want);
    }
}

fn small_study() -> StudyResult {
    let cfg = SimConfig::default();
    monte_carlo(&cfg, 2, &[0.05, 0.95], 40).unwrap()
}

#[test]
fn study_pairs_worlds_and_keeps_every_episode() {
    let cfg = SimConfig::default();
    let res = small_study();
    assert_eq!(res.episodes.len(), 4);
    for s in &res.summaries {
        assert_eq!(s.path_length.as_ref().unwrap().n, 2);
        assert_eq!(s.max_risk.as_ref().unwrap().n, 2);
    }
    for i in 0..2u64 {
        let seed = 40 + i;
        let world = gen_world(&WorldSpec { seed, ..cfg.world.clone() }).unwrap();
        let runs: Vec<_> = res.episodes.iter().zip(&res.traces).filter(|(r, _)| r.seed == seed).collect();
        assert_eq!(runs.len(), 2);
        // every risk level drives the same generated world from the same start
        for (_, trace) in &runs {
            let first = &trace.rows[0];
            assert!((first.x - world.start[0]).abs() < 1e-12 && (first.y - world.start[1]).abs() < 1e-12);
        }
    }
    assert_eq!(res.tests.len(), 2);
    assert!(res.tests.iter().all(|t| (0.0..=1.0).contains(&t.test.p_value)));
}

#[test]
fn study_files_round_trip() {
    let res = small_study();
    let dir = tempfile::tempdir().unwrap();
    write_study(&res, dir.path()).unwrap();
    for f in ["episodes.csv", "study.json", "plotdata.csv", "timing.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let back: StudyResult = serde_json::from_str(&std::fs::read_to_string(dir.path().join("study.json")).unwrap()).unwrap();
    assert_eq!(back.summaries, res.summaries);
    assert_eq!(back.tests, res.tests);
    let rows = std::fs::read_to_string(dir.path().join("episodes.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + res.episodes.len());
    assert_eq!(std::fs::read_dir(dir.path().join("traces")).unwrap().count(), res.episodes.len());
}
