//! Synthetic ground-truth worlds: smoothed random risk fields plus stamped
//! hazard primitives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use step_core::cvar::tail_factor;
use step_core::grid::GridGeometry;
use step_core::riskmap::{CellRisk, CvarMap};

use crate::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldSpec {
    pub seed: u64,
    /// Width and height (m).
    pub size: [f64; 2],
    pub resolution: f64,
    /// Standard deviation of the Gaussian smoothing kernel (m).
    pub correlation_length: f64,
    /// Share of cells made lethal by the random field.
    pub lethal_fraction: f64,
    /// Cell cost mean is `max(0, mean_base + mean_scale·g₁)` and its deviation
    /// `max(0, sigma_base + sigma_scale·g₂)` for unit-variance smooth fields g.
    pub mean_base: f64,
    pub mean_scale: f64,
    pub sigma_base: f64,
    pub sigma_scale: f64,
    /// Cost of a lethal field cell.
    pub lethal_cost: f64,
    pub walls: usize,
    pub pits: usize,
    pub water: usize,
    pub ramps: usize,
    pub ceilings: usize,
    pub goal_distance: f64,
    /// Within this radius of start and goal (m) the risk field is reset to its
    /// base values and cleared of lethality.
    pub carve_radius: f64,
    /// Generated start and goal points have only flat, plain, non-lethal
    /// ground within this distance (m).
    pub endpoint_clearance: f64,
    pub max_retries: usize,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            size: [50.0, 50.0],
            resolution: 0.2,
            correlation_length: 1.0,
            lethal_fraction: 0.02,
            mean_base: 0.05,
            mean_scale: 0.01,
            sigma_base: 0.03,
            sigma_scale: 0.15,
            lethal_cost: 1.0,
            walls: 3,
            pits: 2,
            water: 2,
            ramps: 2,
            ceilings: 1,
            goal_distance: 8.0,
            carve_radius: 0.8,
            endpoint_clearance: 2.0,
            max_retries: 200,
        }
    }
}

impl WorldSpec {
    /// Hazard-free world with zero cost everywhere.
    pub fn empty(size: [f64; 2], resolution: f64) -> Self {
        Self {
            size,
            resolution,
            lethal_fraction: 0.0,
            mean_base: 0.0,
            mean_scale: 0.0,
            sigma_base: 0.0,
            sigma_scale: 0.0,
            walls: 0,
            pits: 0,
            water: 0,
            ramps: 0,
            ceilings: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.size.iter().all(|s| s.is_finite() && *s > 0.0)
            && self.resolution > 0.0
            && self.correlation_length >= 0.0
            && (0.0..1.0).contains(&self.lethal_fraction)
            && self.goal_distance > 0.0
            && self.carve_radius >= 0.0
            && self.endpoint_clearance >= 0.0
            && [self.mean_base, self.mean_scale, self.sigma_base, self.sigma_scale, self.lethal_cost]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(SimError::Spec(format!("invalid world spec: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Ground,
    Wall,
    Pit,
    Water,
}

/// Ground truth. Per-cell arrays are row-major over `geometry`.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub spec: WorldSpec,
    pub geometry: GridGeometry,
    /// Traversability cost distribution of each cell.
    pub cost_mean: Vec<f64>,
    pub cost_sigma: Vec<f64>,
    /// Lethal by the random field.
    pub field_lethal: Vec<bool>,
    pub kind: Vec<CellKind>,
    pub elevation: Vec<f64>,
    /// Return intensity of ground cells; low on water shores.
    pub intensity: Vec<f64>,
    /// Free height under an overhang (m); infinite in the open.
    pub ceiling: Vec<f64>,
    pub start: [f64; 2],
    pub goal: [f64; 2],
}

impl World {
    pub fn is_lethal(&self, idx: usize) -> bool {
        self.field_lethal[idx] || self.kind[idx] != CellKind::Ground
    }

    pub fn lethal_at(&self, p: [f64; 2]) -> bool {
        match self.geometry.cell_at(p[0], p[1]) {
            Some((ix, iy)) => self.is_lethal(self.geometry.index(ix, iy)),
            None => true,
        }
    }

    pub fn lethal_count(&self) -> usize {
        (0..self.geometry.len()).filter(|&i| self.is_lethal(i)).count()
    }

    /// Truth CVaR of one cell at level `alpha`; lethal cells report at least `lethal_cost`.
    pub fn cell_cvar(&self, idx: usize, alpha: f64) -> f64 {
        let k = tail_factor(alpha).expect("alpha in (0, 1)");
        let v = self.cost_mean[idx] + k * self.cost_sigma[idx];
        if self.is_lethal(idx) {
            v.max(self.spec.lethal_cost)
        } else {
            v
        }
    }

    /// Truth risk as a CVaR snapshot, for scoring executed paths.
    pub fn truth_cvar(&self, alpha: f64) -> CvarMap {
        let cells: Vec<CellRisk> = (0..self.geometry.len())
            .map(|i| CellRisk {
                mu: if self.is_lethal(i) { self.spec.lethal_cost.max(self.cost_mean[i]) } else { self.cost_mean[i] },
                sigma: self.cost_sigma[i],
            })
            .collect();
        CvarMap::from_cells(self.geometry, &cells, alpha, f64::INFINITY).expect("valid truth cells")
    }

    /// Bilinear elevation, clamped at the border.
    pub fn elevation_at(&self, p: [f64; 2]) -> f64 {
        let g = &self.geometry;
        let u = ((p[0] - g.origin[0]) / g.resolution - 0.5).clamp(0.0, (g.width - 1) as f64);
        let v = ((p[1] - g.origin[1]) / g.resolution - 0.5).clamp(0.0, (g.height - 1) as f64);
        let (i0, j0) = (u.floor() as usize, v.floor() as usize);
        let (i1, j1) = ((i0 + 1).min(g.width - 1), (j0 + 1).min(g.height - 1));
        let (fu, fv) = (u - i0 as f64, v - j0 as f64);
        let z = |i, j| {
            let z = self.elevation[g.index(i, j)];
            if z.is_finite() {
                z
            } else {
                0.0
            }
        };
        (1.0 - fv) * ((1.0 - fu) * z(i0, j0) + fu * z(i1, j0)) + fv * ((1.0 - fu) * z(i0, j1) + fu * z(i1, j1))
    }

    /// Pitch of a robot at `p` facing `heading`, nose up positive.
    pub fn pitch_at(&self, p: [f64; 2], heading: f64) -> f64 {
        let h = 0.5 * self.geometry.resolution;
        let (c, s) = (heading.cos(), heading.sin());
        let ahead = self.elevation_at([p[0] + h * c, p[1] + h * s]);
        let behind = self.elevation_at([p[0] - h * c, p[1] - h * s]);
        ((ahead - behind) / (2.0 * h)).atan()
    }

    pub fn ceiling_at(&self, p: [f64; 2]) -> Option<f64> {
        let (ix, iy) = self.geometry.cell_at(p[0], p[1])?;
        let c = self.ceiling[self.geometry.index(ix, iy)];
        c.is_finite().then_some(c)
    }
}

/// White noise smoothed by a Gaussian of `sigma_cells`, scaled back to unit
/// variance. Noise is drawn on a padded grid so the border is not attenuated.
pub fn smooth_field(rng: &mut ChaCha8Rng, width: usize, height: usize, sigma_cells: f64) -> Vec<f64> {
    if sigma_cells <= 0.0 {
        return (0..width * height).map(|_| rng.sample(StandardNormal)).collect();
    }
    let r = (3.0 * sigma_cells).ceil() as usize;
    let kernel: Vec<f64> = (0..=2 * r)
        .map(|k| {
            let d = k as f64 - r as f64;
            (-0.5 * d * d / (sigma_cells * sigma_cells)).exp()
        })
        .collect();
    let norm = kernel.iter().map(|w| w * w).sum::<f64>();
    let (pw, ph) = (width + 2 * r, height + 2 * r);
    let noise: Vec<f64> = (0..pw * ph).map(|_| rng.sample(StandardNormal)).collect();
    let mut rows = vec![0.0; width * ph];
    for y in 0..ph {
        for x in 0..width {
            rows[y * width + x] = kernel.iter().enumerate().map(|(k, w)| w * noise[y * pw + x + k]).sum();
        }
    }
    let mut out = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            out[y * width + x] = kernel.iter().enumerate().map(|(k, w)| w * rows[(y + k) * width + x]).sum::<f64>() / norm;
        }
    }
    out
}

fn disc_cells(g: &GridGeometry, c: [f64; 2], r: f64) -> Vec<usize> {
    g.cells_within(c[0], c[1], r).into_iter().map(|(x, y)| g.index(x, y)).collect()
}

fn random_point(rng: &mut ChaCha8Rng, size: [f64; 2], margin: f64) -> [f64; 2] {
    let m = margin.min(0.49 * size[0]).min(0.49 * size[1]);
    [rng.random_range(m..size[0] - m), rng.random_range(m..size[1] - m)]
}

pub fn gen_world(spec: &WorldSpec) -> Result<World, SimError> {
    spec.validate()?;
    let width = (spec.size[0] / spec.resolution).round() as usize;
    let height = (spec.size[1] / spec.resolution).round() as usize;
    let g = GridGeometry::new([0.0, 0.0], spec.resolution, width, height)
        .map_err(|e| SimError::Spec(e.to_string()))?;
    let n = g.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sc = spec.correlation_length / spec.resolution;
    let g1 = smooth_field(&mut rng, width, height, sc);
    let g2 = smooth_field(&mut rng, width, height, sc);
    let g3 = smooth_field(&mut rng, width, height, sc);

    let mut cost_mean: Vec<f64> = g1.iter().map(|v| (spec.mean_base + spec.mean_scale * v).max(0.0)).collect();
    let mut cost_sigma: Vec<f64> = g2.iter().map(|v| (spec.sigma_base + spec.sigma_scale * v).max(0.0)).collect();
    let mut field_lethal = vec![false; n];
    let lethal_n = (spec.lethal_fraction * n as f64).round() as usize;
    if lethal_n > 0 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| g3[b].total_cmp(&g3[a]).then(a.cmp(&b)));
        for &i in &order[..lethal_n] {
            field_lethal[i] = true;
        }
    }

    let mut kind = vec![CellKind::Ground; n];
    let mut elevation = vec![0.0f64; n];
    let mut intensity = vec![0.8; n];
    let mut ceiling = vec![f64::INFINITY; n];
    let size = spec.size;

    for _ in 0..spec.ramps {
        let c = random_point(&mut rng, size, 0.0);
        let radius = rng.random_range(1.5..3.0);
        let slope: f64 = rng.random_range(0.1..0.3);
        for i in disc_cells(&g, c, radius) {
            let p = g.center(g.cell_of_index(i).0, g.cell_of_index(i).1);
            let d = (p[0] - c[0]).hypot(p[1] - c[1]);
            elevation[i] = elevation[i].max(slope.tan() * (radius - d));
        }
    }
    for _ in 0..spec.walls {
        let a = random_point(&mut rng, size, 0.0);
        let len = rng.random_range(2.0..6.0);
        let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let steps = (len / (0.5 * spec.resolution)).ceil() as usize;
        for k in 0..=steps {
            let t = len * k as f64 / steps as f64;
            let p = [a[0] + t * th.cos(), a[1] + t * th.sin()];
            for i in disc_cells(&g, p, 0.2) {
                kind[i] = CellKind::Wall;
            }
        }
    }
    for _ in 0..spec.pits {
        let c = random_point(&mut rng, size, 0.0);
        let r = rng.random_range(0.4..1.0);
        for i in disc_cells(&g, c, r) {
            kind[i] = CellKind::Pit;
            elevation[i] = -1.0;
        }
    }
    for _ in 0..spec.water {
        let c = random_point(&mut rng, size, 0.0);
        let r = rng.random_range(0.6..1.5);
        for i in disc_cells(&g, c, r + 2.5 * spec.resolution) {
            intensity[i] = 0.1;
        }
        for i in disc_cells(&g, c, r) {
            kind[i] = CellKind::Water;
        }
    }
    for _ in 0..spec.ceilings {
        let c = random_point(&mut rng, size, 0.0);
        let r = rng.random_range(1.0..2.0);
        let h = rng.random_range(0.45..0.7);
        for i in disc_cells(&g, c, r) {
            ceiling[i] = h;
        }
    }
    for i in 0..n {
        if field_lethal[i] {
            cost_mean[i] = spec.lethal_cost;
            cost_sigma[i] = 0.0;
        }
        if kind[i] == CellKind::Wall {
            elevation[i] = f64::NAN;
        }
    }

    let mut world = World {
        spec: spec.clone(),
        geometry: g,
        cost_mean,
        cost_sigma,
        field_lethal,
        kind,
        elevation,
        intensity,
        ceiling,
        start: [0.0, 0.0],
        goal: [0.0, 0.0],
    };
    let (start, goal) = pick_start_goal(&mut world, &mut rng)?;
    world.start = start;
    world.goal = goal;
    Ok(world)
}

fn carve(world: &mut World, p: [f64; 2]) {
    let g = world.geometry;
    for i in disc_cells(&g, p, world.spec.carve_radius) {
        world.field_lethal[i] = false;
        world.cost_mean[i] = world.spec.mean_base.max(0.0);
        world.cost_sigma[i] = world.spec.sigma_base.max(0.0);
    }
}

fn endpoint_clear(world: &World, p: [f64; 2]) -> bool {
    let g = world.geometry;
    g.contains(p[0], p[1])
        && disc_cells(&g, p, world.spec.endpoint_clearance)
            .iter()
            .all(|&i| world.kind[i] == CellKind::Ground && !world.field_lethal[i] && world.elevation[i] == 0.0)
}

fn primitive_free(world: &World, p: [f64; 2]) -> bool {
    let g = world.geometry;
    g.contains(p[0], p[1]) && disc_cells(&g, p, world.spec.carve_radius).iter().all(|&i| world.kind[i] == CellKind::Ground)
}

/// Start anywhere, goal `goal_distance` away in a random direction. Points
/// that land on a stamped primitive are redrawn.
fn pick_start_goal(world: &mut World, rng: &mut ChaCha8Rng) -> Result<([f64; 2], [f64; 2]), SimError> {
    let margin = world.spec.carve_radius + world.spec.resolution;
    for _ in 0..world.spec.max_retries {
        let s = random_point(rng, world.spec.size, margin);
        if !endpoint_clear(world, s) {
            continue;
        }
        for _ in 0..world.spec.max_retries {
            let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let d = world.spec.goal_distance;
            let goal = [s[0] + d * th.cos(), s[1] + d * th.sin()];
            let inside = goal[0] >= margin
                && goal[1] >= margin
                && goal[0] <= world.spec.size[0] - margin
                && goal[1] <= world.spec.size[1] - margin;
            if inside && endpoint_clear(world, goal) {
                carve(world, s);
                carve(world, goal);
                return Ok((s, goal));
            }
        }
    }
    Err(SimError::Spec("no admissible start and goal within the retry budget".into()))
}

/// Places start and goal explicitly and flattens the risk field around them
/// to its base values.
pub fn with_start_goal(mut world: World, start: [f64; 2], goal: [f64; 2]) -> Result<World, SimError> {
    for p in [start, goal] {
        if !primitive_free(&world, p) {
            return Err(SimError::Spec(format!("({}, {}) lies on a hazard or off the map", p[0], p[1])));
        }
    }
    carve(&mut world, start);
    carve(&mut world, goal);
    world.start = start;
    world.goal = goal;
    Ok(world)
}
