use step_sim::{gen_world, with_start_goal, CellKind, WorldSpec};

#[test]
fn zero_lethal_fraction_has_no_field_lethal_cells() {
    let w = gen_world(&WorldSpec { lethal_fraction: 0.0, ..WorldSpec::default() }).unwrap();
    assert!(w.field_lethal.iter().all(|l| !l));
}

#[test]
fn generation_is_deterministic() {
    let spec = WorldSpec { seed: 42, ..WorldSpec::default() };
    let a = gen_world(&spec).unwrap();
    let b = gen_world(&spec).unwrap();
    assert_eq!(a.cost_mean.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.cost_mean.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.cost_sigma.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.cost_sigma.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.kind, b.kind);
    assert_eq!(a.field_lethal, b.field_lethal);
    assert_eq!((a.start, a.goal), (b.start, b.goal));
    let c = gen_world(&WorldSpec { seed: 43, ..spec }).unwrap();
    assert_ne!(a.cost_mean, c.cost_mean);
}

#[test]
fn lethal_fraction_on_a_100_cell_square() {
    for seed in 0..5 {
        let spec = WorldSpec { seed, size: [20.0, 20.0], lethal_fraction: 0.1, ..WorldSpec::default() };
        let w = gen_world(&spec).unwrap();
        assert_eq!((w.geometry.width, w.geometry.height), (100, 100));
        let n = w.field_lethal.iter().filter(|l| **l).count();
        assert!(n.abs_diff(1000) <= 20, "seed {seed}: {n} lethal cells");
    }
}

#[test]
fn endpoints_are_safe_and_eight_metres_apart() {
    for seed in 0..30 {
        let w = gen_world(&WorldSpec { seed, ..WorldSpec::default() }).unwrap();
        assert!(!w.lethal_at(w.start) && !w.lethal_at(w.goal), "seed {seed}");
        let d = (w.goal[0] - w.start[0]).hypot(w.goal[1] - w.start[1]);
        assert!((d - 8.0).abs() < 1e-9);
        for p in [w.start, w.goal] {
            for (ix, iy) in w.geometry.cells_within(p[0], p[1], w.spec.carve_radius) {
                let i = w.geometry.index(ix, iy);
                assert!(!w.is_lethal(i));
                assert_eq!(w.cost_mean[i], w.spec.mean_base);
            }
        }
    }
}

#[test]
fn fields_are_nonnegative_and_hazards_are_stamped() {
    let w = gen_world(&WorldSpec { seed: 3, ..WorldSpec::default() }).unwrap();
    assert!(w.cost_mean.iter().all(|v| *v >= 0.0));
    assert!(w.cost_sigma.iter().all(|v| *v >= 0.0));
    for k in [CellKind::Wall, CellKind::Pit, CellKind::Water] {
        assert!(w.kind.contains(&k), "{k:?} missing");
    }
    assert!(w.ceiling.iter().any(|c| c.is_finite()));
    assert!(w.elevation.iter().any(|z| *z > 0.0));
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(gen_world(&WorldSpec { lethal_fraction: 1.0, ..WorldSpec::default() }).is_err());
    assert!(gen_world(&WorldSpec { resolution: 0.0, ..WorldSpec::default() }).is_err());
    assert!(gen_world(&WorldSpec { goal_distance: 100.0, ..WorldSpec::default() }).is_err());
}

#[test]
fn explicit_endpoints_on_hazards_are_rejected() {
    let w = gen_world(&WorldSpec::empty([10.0, 10.0], 0.2)).unwrap();
    let mut blocked = w.clone();
    let (ix, iy) = w.geometry.cell_at(5.0, 5.0).unwrap();
    blocked.kind[w.geometry.index(ix, iy)] = CellKind::Pit;
    assert!(with_start_goal(blocked, [5.0, 5.0], [1.0, 1.0]).is_err());
    let ok = with_start_goal(w, [2.0, 2.0], [8.0, 2.0]).unwrap();
    assert_eq!(ok.goal, [8.0, 2.0]);
}
