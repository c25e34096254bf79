//! Uniform 2.5D grid with named `f64` layers.
//!
//! Cell `(ix, iy)` covers `[origin + ix·res, origin + (ix+1)·res)` along x and
//! likewise along y. Layers are stored row-major (`iy * width + ix`). `NaN`
//! marks an unknown value; boolean layers hold 0 or 1.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub mod layers {
    pub const ELEVATION: &str = "elevation";
    pub const ELEVATION_VAR: &str = "elevation_var";
    pub const COVER_COUNT: &str = "coverage_count";
    pub const COVER_MX: &str = "coverage_mx";
    pub const COVER_MY: &str = "coverage_my";
    pub const COVER_MSE: &str = "coverage_mse";
    pub const RETURN_COUNT: &str = "return_count";
    pub const GAP_COUNT: &str = "gap_count";
    pub const INTENSITY: &str = "intensity";
    pub const RANGE: &str = "range";
    pub const TERRAIN_COUNT: &str = "terrain_count";
    pub const TERRAIN_MEAN: &str = "terrain_mean";
    pub const TERRAIN_M2: &str = "terrain_m2";
    pub const CVAR: &str = "cvar";
    pub const LETHAL: &str = "lethal";
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub origin: [f64; 2],
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
}

impl GridGeometry {
    pub fn new(origin: [f64; 2], resolution: f64, width: usize, height: usize) -> Result<Self> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(CoreError::Domain(format!("resolution {resolution}")));
        }
        if width == 0 || height == 0 {
            return Err(CoreError::Domain("empty grid".into()));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(CoreError::NonFinite("origin".into()));
        }
        Ok(Self {
            origin,
            resolution,
            width,
            height,
        })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.width && iy < self.height);
        iy * self.width + ix
    }

    pub fn cell_of_index(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    pub fn cell_at(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = ((x - self.origin[0]) / self.resolution).floor();
        let fy = ((y - self.origin[1]) / self.resolution).floor();
        if fx >= 0.0 && fy >= 0.0 && fx < self.width as f64 && fy < self.height as f64 {
            Some((fx as usize, fy as usize))
        } else {
            None
        }
    }

    pub fn center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            self.origin[0] + (ix as f64 + 0.5) * self.resolution,
            self.origin[1] + (iy as f64 + 0.5) * self.resolution,
        ]
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.cell_at(x, y).is_some()
    }

    /// In-bounds cells of the 8-neighborhood.
    pub fn neighbors8(&self, ix: usize, iy: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        const OFFSETS: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
        OFFSETS.iter().filter_map(move |&(dx, dy)| {
            let nx = ix as i64 + dx;
            let ny = iy as i64 + dy;
            (nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height)
                .then_some((nx as usize, ny as usize))
        })
    }

    /// Cells whose centers lie within `radius` of `(x, y)`.
    pub fn cells_within(&self, x: f64, y: f64, radius: f64) -> Vec<(usize, usize)> {
        let r = self.resolution;
        let lo_x = (((x - radius - self.origin[0]) / r).floor().max(0.0)) as usize;
        let lo_y = (((y - radius - self.origin[1]) / r).floor().max(0.0)) as usize;
        let hi_x = (((x + radius - self.origin[0]) / r).ceil()).min(self.width as f64 - 1.0);
        let hi_y = (((y + radius - self.origin[1]) / r).ceil()).min(self.height as f64 - 1.0);
        if hi_x < 0.0 || hi_y < 0.0 {
            return Vec::new();
        }
        let mut out = Vec::new();
        for iy in lo_y..=hi_y as usize {
            for ix in lo_x..=hi_x as usize {
                let c = self.center(ix, iy);
                if (c[0] - x).hypot(c[1] - y) <= radius {
                    out.push((ix, iy));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefGridMap {
    geometry: GridGeometry,
    layers: BTreeMap<String, Vec<f64>>,
}

impl BeliefGridMap {
    pub fn new(geometry: GridGeometry) -> Self {
        Self {
            geometry,
            layers: BTreeMap::new(),
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn layer_names(&self) -> impl Iterator<Item = &str> {
        self.layers.keys().map(String::as_str)
    }

    pub fn has_layer(&self, name: &str) -> bool {
        self.layers.contains_key(name)
    }

    /// Creates the layer filled with `fill` if it does not exist yet.
    pub fn ensure_layer(&mut self, name: &str, fill: f64) -> &mut Vec<f64> {
        let n = self.geometry.len();
        self.layers.entry(name.to_owned()).or_insert_with(|| vec![fill; n])
    }

    pub fn set_layer(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.geometry.len() {
            return Err(CoreError::Shape(format!(
                "layer `{name}` has {} values, grid has {}",
                values.len(),
                self.geometry.len()
            )));
        }
        self.layers.insert(name.to_owned(), values);
        Ok(())
    }

    pub fn layer(&self, name: &str) -> Result<&[f64]> {
        self.layers
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| CoreError::MissingLayer(name.to_owned()))
    }

    pub fn layer_mut(&mut self, name: &str) -> Result<&mut [f64]> {
        self.layers
            .get_mut(name)
            .map(Vec::as_mut_slice)
            .ok_or_else(|| CoreError::MissingLayer(name.to_owned()))
    }

    pub fn get(&self, name: &str, ix: usize, iy: usize) -> Result<f64> {
        let idx = self.geometry.index(ix, iy);
        Ok(self.layer(name)?[idx])
    }

    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        let header = SnapshotHeader {
            origin: self.geometry.origin,
            resolution: self.geometry.resolution,
            width: self.geometry.width,
            height: self.geometry.height,
            layers: self.layers.keys().cloned().collect(),
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u32).to_le_bytes())?;
        w.write_all(&json)?;
        for values in self.layers.values() {
            for v in values {
                w.write_all(&v.to_bits().to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(CoreError::Snapshot("bad magic".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != SNAPSHOT_VERSION {
            return Err(CoreError::Snapshot(format!("unsupported version {version}")));
        }
        r.read_exact(&mut word)?;
        let mut json = vec![0u8; u32::from_le_bytes(word) as usize];
        r.read_exact(&mut json)?;
        let header: SnapshotHeader = serde_json::from_slice(&json)?;
        let geometry = GridGeometry::new(header.origin, header.resolution, header.width, header.height)?;
        let mut map = Self::new(geometry);
        let mut buf = [0u8; 8];
        for name in header.layers {
            let mut values = Vec::with_capacity(geometry.len());
            for _ in 0..geometry.len() {
                r.read_exact(&mut buf)?;
                values.push(f64::from_bits(u64::from_le_bytes(buf)));
            }
            map.layers.insert(name, values);
        }
        Ok(map)
    }
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"STEPGRID";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SnapshotHeader {
    origin: [f64; 2],
    resolution: f64,
    width: usize,
    height: usize,
    layers: Vec<String>,
}

/// Visibility of a cell from one sensor position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellView {
    OutOfRange,
    Occluded,
    Visible,
}

/// 2-D line-of-sight from `from` to every cell within `range`. A cell is
/// occluded when any cell strictly between it and the sensor cell blocks.
pub fn visibility(geometry: &GridGeometry, blocking: &[bool], from: [f64; 2], range: f64) -> Vec<CellView> {
    let mut out = vec![CellView::OutOfRange; geometry.len()];
    let Some(src) = geometry.cell_at(from[0], from[1]) else {
        return out;
    };
    for (ix, iy) in geometry.cells_within(from[0], from[1], range) {
        let idx = geometry.index(ix, iy);
        let clear = line_cells(src, (ix, iy))
            .into_iter()
            .filter(|&c| c != src && c != (ix, iy))
            .all(|(cx, cy)| !blocking[geometry.index(cx, cy)]);
        out[idx] = if clear { CellView::Visible } else { CellView::Occluded };
    }
    out
}

/// Bresenham cells from `a` to `b` inclusive.
pub fn line_cells(a: (usize, usize), b: (usize, usize)) -> Vec<(usize, usize)> {
    let (mut x0, mut y0) = (a.0 as i64, a.1 as i64);
    let (x1, y1) = (b.0 as i64, b.1 as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        out.push((x0 as usize, y0 as usize));
        if x0 == x1 && y0 == y1 {
            return out;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_lookup_round_trips_through_centers() {
        let g = GridGeometry::new([-1.0, 2.0], 0.25, 8, 4).unwrap();
        for iy in 0..4 {
            for ix in 0..8 {
                let c = g.center(ix, iy);
                assert_eq!(g.cell_at(c[0], c[1]), Some((ix, iy)));
            }
        }
        assert_eq!(g.cell_at(-1.01, 2.1), None);
        assert_eq!(g.cell_at(1.0, 2.1), None);
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let g = GridGeometry::new([0.1, -3.7], 0.2, 5, 3).unwrap();
        let mut m = BeliefGridMap::new(g);
        m.set_layer("a", (0..15).map(|i| (i as f64).sin() / 3.0).collect()).unwrap();
        let mut b: Vec<f64> = vec![f64::NAN; 15];
        b[3] = -0.0;
        b[4] = f64::INFINITY;
        m.set_layer("b", b).unwrap();
        let mut buf = Vec::new();
        m.write_snapshot(&mut buf).unwrap();
        let back = BeliefGridMap::read_snapshot(&buf[..]).unwrap();
        assert_eq!(back.geometry(), m.geometry());
        for name in ["a", "b"] {
            let x: Vec<u64> = m.layer(name).unwrap().iter().map(|v| v.to_bits()).collect();
            let y: Vec<u64> = back.layer(name).unwrap().iter().map(|v| v.to_bits()).collect();
            assert_eq!(x, y);
        }
    }

    #[test]
    fn wall_occludes_cells_behind_it() {
        let g = GridGeometry::new([0.0, 0.0], 1.0, 10, 3).unwrap();
        let mut blocking = vec![false; g.len()];
        blocking[g.index(5, 1)] = true;
        let v = visibility(&g, &blocking, [0.5, 1.5], 20.0);
        assert_eq!(v[g.index(5, 1)], CellView::Visible);
        assert_eq!(v[g.index(8, 1)], CellView::Occluded);
        assert_eq!(v[g.index(3, 1)], CellView::Visible);
    }
}
