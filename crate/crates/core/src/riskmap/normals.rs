use crate::error::Result;
use crate::grid::{layers, BeliefGridMap, GridGeometry};

/// Per-cell surface slopes from local least-squares plane fits, with bilinear
/// interpolation between cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalField {
    pub geometry: GridGeometry,
    /// ∂z/∂x of the fitted plane; `NaN` where the fit is unavailable.
    pub slope_x: Vec<f64>,
    /// ∂z/∂y of the fitted plane.
    pub slope_y: Vec<f64>,
}

/// Interpolated normal and its derivative with respect to position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalSample {
    pub n: [f64; 3],
    /// `dn[i][j] = ∂n_i/∂p_j`.
    pub dn: [[f64; 2]; 3],
}

fn normal_from_slopes(a: f64, b: f64) -> [f64; 3] {
    let s = (a * a + b * b + 1.0).sqrt();
    [-a / s, -b / s, 1.0 / s]
}

/// Fits `z = a·dx + b·dy + c` over known cells whose centers lie within
/// `footprint_radius` of each cell center. Fewer than three known cells, or
/// collinear ones, leave the cell unknown.
pub fn surface_normals(map: &BeliefGridMap, footprint_radius: f64) -> Result<NormalField> {
    let g = *map.geometry();
    let elev = map.layer(layers::ELEVATION)?;
    let mut slope_x = vec![f64::NAN; g.len()];
    let mut slope_y = vec![f64::NAN; g.len()];
    for iy in 0..g.height {
        for ix in 0..g.width {
            let c = g.center(ix, iy);
            // normal equations in centered coordinates
            let mut s = [[0.0f64; 3]; 3];
            let mut rhs = [0.0f64; 3];
            let mut count = 0;
            for (jx, jy) in g.cells_within(c[0], c[1], footprint_radius) {
                let z = elev[g.index(jx, jy)];
                if z.is_nan() {
                    continue;
                }
                let p = g.center(jx, jy);
                let row = [p[0] - c[0], p[1] - c[1], 1.0];
                for r in 0..3 {
                    for k in 0..3 {
                        s[r][k] += row[r] * row[k];
                    }
                    rhs[r] += row[r] * z;
                }
                count += 1;
            }
            if count < 3 {
                continue;
            }
            if let Some(sol) = solve3(s, rhs) {
                let idx = g.index(ix, iy);
                slope_x[idx] = sol[0];
                slope_y[idx] = sol[1];
            }
        }
    }
    Ok(NormalField {
        geometry: g,
        slope_x,
        slope_y,
    })
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let d = det3(&m);
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    if d.abs() <= 1e-10 * scale.powi(3) {
        return None;
    }
    let mut out = [0.0; 3];
    for (col, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for r in 0..3 {
            mc[r][col] = b[r];
        }
        *o = det3(&mc) / d;
    }
    Some(out)
}

impl NormalField {
    pub fn normal(&self, ix: usize, iy: usize) -> Option<[f64; 3]> {
        let idx = self.geometry.index(ix, iy);
        let (a, b) = (self.slope_x[idx], self.slope_y[idx]);
        (!a.is_nan() && !b.is_nan()).then(|| normal_from_slopes(a, b))
    }

    /// Bilinearly interpolated slopes at `(x, y)`, clamped at the outer cell
    /// centers, with the normal's position derivative. `None` if any of the
    /// four supporting cells is unknown or the point is off the map.
    pub fn sample(&self, x: f64, y: f64) -> Option<NormalSample> {
        let g = &self.geometry;
        if !g.contains(x, y) {
            return None;
        }
        let axis = |v: f64, origin: f64, n: usize| -> (usize, usize, f64, f64) {
            let u = (v - origin) / g.resolution - 0.5;
            if n == 1 {
                return (0, 0, 0.0, 0.0);
            }
            let i0 = (u.floor().max(0.0) as usize).min(n - 2);
            let t = u - i0 as f64;
            if t <= 0.0 {
                (i0, i0 + 1, 0.0, 0.0)
            } else if t >= 1.0 {
                (i0, i0 + 1, 1.0, 0.0)
            } else {
                (i0, i0 + 1, t, 1.0 / g.resolution)
            }
        };
        let (x0, x1, tx, dtx) = axis(x, g.origin[0], g.width);
        let (y0, y1, ty, dty) = axis(y, g.origin[1], g.height);
        let corners = [(x0, y0), (x1, y0), (x0, y1), (x1, y1)];
        let mut sa = [0.0; 4];
        let mut sb = [0.0; 4];
        for (k, &(cx, cy)) in corners.iter().enumerate() {
            let idx = g.index(cx, cy);
            sa[k] = self.slope_x[idx];
            sb[k] = self.slope_y[idx];
            if sa[k].is_nan() || sb[k].is_nan() {
                return None;
            }
        }
        let w = [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty];
        let wx = [-(1.0 - ty) * dtx, (1.0 - ty) * dtx, -ty * dtx, ty * dtx];
        let wy = [-(1.0 - tx) * dty, -tx * dty, (1.0 - tx) * dty, tx * dty];
        let dot4 = |w: &[f64; 4], v: &[f64; 4]| w.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let (a, b) = (dot4(&w, &sa), dot4(&w, &sb));
        let da = [dot4(&wx, &sa), dot4(&wy, &sa)];
        let db = [dot4(&wx, &sb), dot4(&wy, &sb)];

        let n = normal_from_slopes(a, b);
        let norm = (a * a + b * b + 1.0).sqrt();
        // n = v/|v| with v = (−a, −b, 1): dn = (I − n nᵀ) dv / |v|
        let mut dn = [[0.0; 2]; 3];
        for j in 0..2 {
            let dv = [-da[j], -db[j], 0.0];
            let ndv = n[0] * dv[0] + n[1] * dv[1] + n[2] * dv[2];
            for i in 0..3 {
                dn[i][j] = (dv[i] - n[i] * ndv) / norm;
            }
        }
        Some(NormalSample { n, dn })
    }

    /// Writes `normal_x`, `normal_y`, `normal_z` layers (`NaN` where unknown).
    pub fn write_layers(&self, map: &mut BeliefGridMap) -> Result<()> {
        let mut cols = [Vec::new(), Vec::new(), Vec::new()];
        for idx in 0..self.geometry.len() {
            let (ix, iy) = self.geometry.cell_of_index(idx);
            let n = self.normal(ix, iy).unwrap_or([f64::NAN; 3]);
            for k in 0..3 {
                cols[k].push(n[k]);
            }
        }
        let [x, y, z] = cols;
        map.set_layer("normal_x", x)?;
        map.set_layer("normal_y", y)?;
        map.set_layer("normal_z", z)
    }
}
