use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::riskmap::CvarMap;

use super::model::RobotState6;

/// Strictly convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    vertices: Vec<[f64; 2]>,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

impl ConvexPolygon {
    /// Accepts either winding; clockwise input is reversed.
    pub fn new(mut vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(CoreError::Degenerate(format!("{} vertices", vertices.len())));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("polygon vertex".into()));
        }
        let n = vertices.len();
        let area: f64 = (0..n).map(|i| cross([0.0, 0.0], vertices[i], vertices[(i + 1) % n])).sum();
        if area < 0.0 {
            vertices.reverse();
        }
        let scale = vertices
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1.0);
        for i in 0..n {
            let c = cross(vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            if c <= 1e-12 * scale * scale {
                return Err(CoreError::Degenerate("polygon is not strictly convex".into()));
            }
        }
        Ok(Self { vertices })
    }

    /// Rectangle with half extents `[hx, hy]` rotated by `yaw` about its center.
    pub fn rectangle(center: [f64; 2], half: [f64; 2], yaw: f64) -> Result<Self> {
        let (s, c) = yaw.sin_cos();
        let corners = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
        Self::new(
            corners
                .iter()
                .map(|k| {
                    let (lx, ly) = (k[0] * half[0], k[1] * half[1]);
                    [center[0] + c * lx - s * ly, center[1] + s * lx + c * ly]
                })
                .collect(),
        )
    }

    pub fn from_aabb(min: [f64; 2], max: [f64; 2]) -> Result<Self> {
        Self::new(vec![min, [max[0], min[1]], max, [min[0], max[1]]])
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn centroid(&self) -> [f64; 2] {
        let n = self.vertices.len() as f64;
        let s = self.vertices.iter().fold([0.0, 0.0], |a, v| [a[0] + v[0], a[1] + v[1]]);
        [s[0] / n, s[1] / n]
    }

    /// Center and radius of a circle enclosing the polygon.
    pub fn bounding_circle(&self) -> ([f64; 2], f64) {
        let c = self.centroid();
        let r = self.vertices.iter().map(|v| sub(*v, c)).map(|d| dot(d, d).sqrt()).fold(0.0, f64::max);
        (c, r)
    }

    /// Outward unit normals of each edge `i → i+1`.
    pub fn edge_normals(&self) -> Vec<[f64; 2]> {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let e = sub(self.vertices[(i + 1) % n], self.vertices[i]);
                let l = dot(e, e).sqrt();
                [e[1] / l, -e[0] / l]
            })
            .collect()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| cross(self.vertices[i], self.vertices[(i + 1) % n], p) >= 0.0)
    }

    fn support_max(&self, d: [f64; 2]) -> (f64, [f64; 2]) {
        let mut best = (f64::NEG_INFINITY, self.vertices[0]);
        for v in &self.vertices {
            let s = dot(*v, d);
            if s > best.0 {
                best = (s, *v);
            }
        }
        best
    }

    fn support_min(&self, d: [f64; 2]) -> (f64, [f64; 2]) {
        let (s, v) = self.support_max([-d[0], -d[1]]);
        (-s, v)
    }
}

/// Signed distance with witness points. `normal` points from A towards B;
/// moving B by `−value·normal` (or A by `+value·normal`) brings the sets into
/// contact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedDistance {
    pub value: f64,
    pub normal: [f64; 2],
    pub point_a: [f64; 2],
    pub point_b: [f64; 2],
}

fn closest_on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let ab = sub(b, a);
    let l2 = dot(ab, ab);
    let t = if l2 > 0.0 { (dot(sub(p, a), ab) / l2).clamp(0.0, 1.0) } else { 0.0 };
    [a[0] + t * ab[0], a[1] + t * ab[1]]
}

/// Distance between disjoint polygons as the closest pair over all
/// vertex/edge combinations.
fn separation(a: &ConvexPolygon, b: &ConvexPolygon) -> ([f64; 2], [f64; 2], f64) {
    let mut best = ([0.0; 2], [0.0; 2], f64::INFINITY);
    let mut consider = |pa: [f64; 2], pb: [f64; 2]| {
        let d = sub(pb, pa);
        let l = dot(d, d);
        if l < best.2 {
            best = (pa, pb, l);
        }
    };
    for (p, q, flip) in [(a, b, false), (b, a, true)] {
        let m = q.vertices.len();
        for v in &p.vertices {
            for j in 0..m {
                let c = closest_on_segment(*v, q.vertices[j], q.vertices[(j + 1) % m]);
                if flip {
                    consider(c, *v);
                } else {
                    consider(*v, c);
                }
            }
        }
    }
    (best.0, best.1, best.2.sqrt())
}

pub fn signed_distance_full(a: &ConvexPolygon, b: &ConvexPolygon) -> SignedDistance {
    // separating-axis search; the best axis gives the penetration depth
    let mut best = (f64::NEG_INFINITY, [1.0, 0.0]);
    for n in a.edge_normals() {
        let s = b.support_min(n).0 - a.support_max(n).0;
        if s > best.0 {
            best = (s, n);
        }
    }
    for m in b.edge_normals() {
        let n = [-m[0], -m[1]];
        let s = b.support_min(n).0 - a.support_max(n).0;
        if s > best.0 {
            best = (s, n);
        }
    }
    if best.0 > 0.0 {
        let (pa, pb, d) = separation(a, b);
        let normal = if d > 0.0 { [(pb[0] - pa[0]) / d, (pb[1] - pa[1]) / d] } else { best.1 };
        SignedDistance { value: d, normal, point_a: pa, point_b: pb }
    } else {
        let n = best.1;
        let pb = b.support_min(n).1;
        let pa = [pb[0] - best.0 * n[0], pb[1] - best.0 * n[1]];
        SignedDistance { value: best.0, normal: n, point_a: pa, point_b: pb }
    }
}

/// Positive separation distance, or the negative minimum translation that
/// separates penetrating polygons. Zero when touching.
pub fn signed_distance(a: &ConvexPolygon, b: &ConvexPolygon) -> f64 {
    signed_distance_full(a, b).value
}

/// Whether `sd(a, b) ≤ 0`, with a bounding-circle early exit.
pub fn in_collision(a: &ConvexPolygon, b: &ConvexPolygon) -> bool {
    let (ca, ra) = a.bounding_circle();
    let (cb, rb) = b.bounding_circle();
    let d = sub(cb, ca);
    if dot(d, d).sqrt() > ra + rb {
        return false;
    }
    signed_distance(a, b) <= 0.0
}

/// Rectangular robot footprint, length along the body x axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub length: f64,
    pub width: f64,
}

impl Default for Footprint {
    fn default() -> Self {
        Self { length: 0.99, width: 0.67 }
    }
}

impl Footprint {
    pub fn polygon(&self, x: &RobotState6) -> ConvexPolygon {
        ConvexPolygon::rectangle([x.px, x.py], [self.length / 2.0, self.width / 2.0], x.theta)
            .expect("footprint dimensions are positive")
    }

    pub fn radius(&self) -> f64 {
        0.5 * self.length.hypot(self.width)
    }
}

/// Gradient of `sd(footprint(x), B)` with respect to `(px, py, θ)`, holding
/// the witness normal fixed.
pub fn signed_distance_gradient(sd: &SignedDistance, x: &RobotState6) -> [f64; 3] {
    let n = sd.normal;
    let r = [sd.point_a[0] - x.px, sd.point_a[1] - x.py];
    // d(point_a)/dθ = ẑ × r
    let dtheta = -(n[0] * -r[1] + n[1] * r[0]);
    [-n[0], -n[1], dtheta]
}

/// Greedy maximal-rectangle decomposition of the cells lethal under
/// `rho_max`, optionally restricted to the cell window `[x0, x1) × [y0, y1)`.
pub fn decompose_obstacles(
    map: &CvarMap,
    rho_max: f64,
    window: Option<(usize, usize, usize, usize)>,
) -> Vec<ConvexPolygon> {
    let g = *map.geometry();
    let m = map.relaxed(rho_max);
    let (x0, y0, x1, y1) = window.unwrap_or((0, 0, g.width, g.height));
    let (x1, y1) = (x1.min(g.width), y1.min(g.height));
    let mut open = vec![false; g.len()];
    for iy in y0..y1 {
        for ix in x0..x1 {
            let i = g.index(ix, iy);
            open[i] = m.is_lethal(i);
        }
    }
    let mut out = Vec::new();
    for iy in y0..y1 {
        for ix in x0..x1 {
            if !open[g.index(ix, iy)] {
                continue;
            }
            let mut ex = ix;
            while ex + 1 < x1 && open[g.index(ex + 1, iy)] {
                ex += 1;
            }
            let mut ey = iy;
            while ey + 1 < y1 && (ix..=ex).all(|jx| open[g.index(jx, ey + 1)]) {
                ey += 1;
            }
            for jy in iy..=ey {
                for jx in ix..=ex {
                    open[g.index(jx, jy)] = false;
                }
            }
            let r = g.resolution;
            let min = [g.origin[0] + ix as f64 * r, g.origin[1] + iy as f64 * r];
            let max = [g.origin[0] + (ex + 1) as f64 * r, g.origin[1] + (ey + 1) as f64 * r];
            out.push(ConvexPolygon::from_aabb(min, max).expect("cell rectangle"));
        }
    }
    out
}
