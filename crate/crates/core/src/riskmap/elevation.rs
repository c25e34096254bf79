use crate::grid::{layers, BeliefGridMap};

/// A pre-labeled ground return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElevationPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Seconds since the point was measured.
    pub age: f64,
    /// Raw measurement variance (m²).
    pub var: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ElevationStats {
    pub applied: usize,
    pub dropped: usize,
}

/// Per-cell scalar Kalman update of the elevation layers.
///
/// Points are fused oldest first. A point of age `a` enters with variance
/// `var·(1 + a/τ)`, so recent measurements carry more weight. Points outside
/// the map, or with non-finite values, are counted as dropped.
pub fn elevation_update(map: &mut BeliefGridMap, points: &[ElevationPoint], age_tau: f64) -> ElevationStats {
    let geometry = *map.geometry();
    map.ensure_layer(layers::ELEVATION, f64::NAN);
    map.ensure_layer(layers::ELEVATION_VAR, f64::NAN);

    let mut stats = ElevationStats::default();
    let mut ordered: Vec<(usize, &ElevationPoint)> = Vec::with_capacity(points.len());
    for p in points {
        let valid = p.z.is_finite() && p.var > 0.0 && p.var.is_finite() && p.age >= 0.0;
        match geometry.cell_at(p.x, p.y) {
            Some((ix, iy)) if valid => ordered.push((geometry.index(ix, iy), p)),
            _ => stats.dropped += 1,
        }
    }
    // oldest first; stable so equal ages keep input order
    ordered.sort_by(|a, b| b.1.age.total_cmp(&a.1.age));

    let mut mean = std::mem::take(map.ensure_layer(layers::ELEVATION, f64::NAN));
    let mut var = std::mem::take(map.ensure_layer(layers::ELEVATION_VAR, f64::NAN));
    for (idx, p) in ordered {
        let r = p.var * (1.0 + p.age / age_tau);
        if mean[idx].is_nan() {
            mean[idx] = p.z;
            var[idx] = r;
        } else {
            let k = var[idx] / (var[idx] + r);
            mean[idx] += k * (p.z - mean[idx]);
            var[idx] *= 1.0 - k;
        }
        stats.applied += 1;
    }
    map.set_layer(layers::ELEVATION, mean).expect("same shape");
    map.set_layer(layers::ELEVATION_VAR, var).expect("same shape");
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridGeometry;

    fn map() -> BeliefGridMap {
        BeliefGridMap::new(GridGeometry::new([0.0, 0.0], 1.0, 4, 4).unwrap())
    }

    fn pt(z: f64, age: f64, var: f64) -> ElevationPoint {
        ElevationPoint { x: 1.5, y: 1.5, z, age, var }
    }

    #[test]
    fn first_observation_initializes() {
        let mut m = map();
        elevation_update(&mut m, &[pt(1.0, 0.0, 0.04)], 5.0);
        assert_eq!(m.get(layers::ELEVATION, 1, 1).unwrap(), 1.0);
        assert_eq!(m.get(layers::ELEVATION_VAR, 1, 1).unwrap(), 0.04);
        assert!(m.get(layers::ELEVATION, 0, 0).unwrap().is_nan());
    }

    #[test]
    fn equal_variance_fusion() {
        let mut m = map();
        elevation_update(&mut m, &[pt(0.0, 0.0, 1.0)], 5.0);
        elevation_update(&mut m, &[pt(1.0, 0.0, 1.0)], 5.0);
        assert_eq!(m.get(layers::ELEVATION, 1, 1).unwrap(), 0.5);
        assert_eq!(m.get(layers::ELEVATION_VAR, 1, 1).unwrap(), 0.5);
    }

    #[test]
    fn off_map_points_are_counted() {
        let mut m = map();
        let s = elevation_update(&mut m, &[ElevationPoint { x: -1.0, ..pt(0.0, 0.0, 1.0) }, pt(0.0, 0.0, 1.0)], 5.0);
        assert_eq!(s, ElevationStats { applied: 1, dropped: 1 });
    }
}
