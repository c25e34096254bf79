pub type Pt = [f64; 2];

fn dot(a: Pt, b: Pt) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `min_b d·b − max_a d·a` for unit direction `d`.
pub fn separation_along(a: &[Pt], b: &[Pt], d: Pt) -> f64 {
    let max_a = a.iter().map(|p| dot(*p, d)).fold(f64::NEG_INFINITY, f64::max);
    let min_b = b.iter().map(|p| dot(*p, d)).fold(f64::INFINITY, f64::min);
    min_b - max_a
}

/// Signed distance as the best separation over a dense sweep of directions.
pub fn sd_sweep(a: &[Pt], b: &[Pt], samples: usize) -> f64 {
    (0..samples)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / samples as f64;
            separation_along(a, b, [t.cos(), t.sin()])
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Signed distance as the best separation over every direction that can be
/// a maximizer: edge normals of both polygons and directions between vertex
/// pairs.
pub fn sd_candidate_directions(a: &[Pt], b: &[Pt]) -> f64 {
    let mut dirs = Vec::new();
    for poly in [a, b] {
        for i in 0..poly.len() {
            let p = poly[i];
            let q = poly[(i + 1) % poly.len()];
            let e = [q[0] - p[0], q[1] - p[1]];
            let n = e[0].hypot(e[1]);
            if n > 0.0 {
                dirs.push([e[1] / n, -e[0] / n]);
                dirs.push([-e[1] / n, e[0] / n]);
            }
        }
    }
    for pa in a {
        for pb in b {
            let v = [pb[0] - pa[0], pb[1] - pa[1]];
            let n = v[0].hypot(v[1]);
            if n > 0.0 {
                dirs.push([v[0] / n, v[1] / n]);
            }
        }
    }
    dirs.into_iter()
        .map(|d| separation_along(a, b, d))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn cross(o: Pt, a: Pt, b: Pt) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn inside_or_on(poly: &[Pt], p: Pt) -> bool {
    let n = poly.len();
    let mut pos = false;
    let mut neg = false;
    for i in 0..n {
        let c = cross(poly[i], poly[(i + 1) % n], p);
        pos |= c > 0.0;
        neg |= c < 0.0;
    }
    !(pos && neg)
}

fn on_segment(p: Pt, q: Pt, r: Pt) -> bool {
    r[0] >= p[0].min(q[0]) && r[0] <= p[0].max(q[0]) && r[1] >= p[1].min(q[1]) && r[1] <= p[1].max(q[1])
}

fn segments_intersect(p1: Pt, p2: Pt, q1: Pt, q2: Pt) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Closed-set intersection test: a vertex of one polygon inside the other, or
/// any pair of edges crossing.
pub fn polygons_intersect(a: &[Pt], b: &[Pt]) -> bool {
    if a.iter().any(|p| inside_or_on(b, *p)) || b.iter().any(|p| inside_or_on(a, *p)) {
        return true;
    }
    for i in 0..a.len() {
        for j in 0..b.len() {
            if segments_intersect(a[i], a[(i + 1) % a.len()], b[j], b[(j + 1) % b.len()]) {
                return true;
            }
        }
    }
    false
}

/// Dense sweep followed by golden-section refinement around the best few
/// samples; accurate to well below 1e-9 for polygons of unit scale.
pub fn sd_sweep_refined(a: &[Pt], b: &[Pt], samples: usize) -> f64 {
    let step = std::f64::consts::TAU / samples as f64;
    let f = |t: f64| separation_along(a, b, [t.cos(), t.sin()]);
    let mut coarse: Vec<(f64, f64)> = (0..samples).map(|i| (f(i as f64 * step), i as f64 * step)).collect();
    coarse.sort_by(|x, y| y.0.total_cmp(&x.0));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut best = coarse[0].0;
    for &(_, t) in coarse.iter().take(8) {
        let (mut lo, mut hi) = (t - step, t + step);
        let mut x1 = hi - phi * (hi - lo);
        let mut x2 = lo + phi * (hi - lo);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..200 {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = f(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = f(x1);
            }
        }
        best = best.max(f1).max(f2);
    }
    best
}
