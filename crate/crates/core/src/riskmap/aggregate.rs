use crate::cvar::tail_factor;
use crate::error::{CoreError, Result};
use crate::grid::{layers, BeliefGridMap, GridGeometry};
use crate::riskmap::{CellRisk, Factor, RiskFactorConfig, RiskLayer};

/// Immutable aggregated risk snapshot consumed by the planners.
#[derive(Debug, Clone, PartialEq)]
pub struct CvarMap {
    geometry: GridGeometry,
    alpha: f64,
    mean: Vec<f64>,
    sigma: Vec<f64>,
    /// CVaR, raised to at least the lethal mean where a factor is lethal.
    severity: Vec<f64>,
    factor_lethal: Vec<bool>,
    known: Vec<bool>,
    rho_max: f64,
}

/// Combines factor layers into a CVaR layer.
///
/// Per cell `μ = Σ wₗ μₗ` and `σ² = Σ wₗ² σₗ²`. A factor that is unknown at
/// a cell contributes mean 0 and deviation `max_sigma`; a cell with every
/// factor unknown gets `(prior_mean, max_sigma)` and is flagged unknown. A cell
/// is lethal if any factor is lethal, or if it is known and its CVaR exceeds
/// `lethal_threshold`.
pub fn aggregate_cvar(factors: &[(Factor, &RiskLayer)], cfg: &RiskFactorConfig, alpha: f64) -> Result<CvarMap> {
    cfg.validate()?;
    let k = tail_factor(alpha)?;
    let Some((_, first)) = factors.first() else {
        return Err(CoreError::Shape("no factor layers".into()));
    };
    let geometry = first.geometry;
    for (f, l) in factors {
        if l.geometry != geometry || l.mean.len() != geometry.len() || l.var.len() != geometry.len() {
            return Err(CoreError::Shape(format!("{f:?} layer differs from the first layer")));
        }
    }
    let n = geometry.len();
    let mut mean = vec![0.0; n];
    let mut sigma = vec![0.0; n];
    let mut severity = vec![0.0; n];
    let mut factor_lethal = vec![false; n];
    let mut known = vec![false; n];
    for i in 0..n {
        let (mut mu, mut var, mut any) = (0.0, 0.0, false);
        let mut lethal = false;
        for (f, l) in factors {
            let w = cfg.weights.get(*f);
            lethal |= l.lethal[i];
            if l.is_known(i) {
                any = true;
                mu += w * l.mean[i];
                var += w * w * l.var[i].max(0.0);
            } else {
                var += w * w * cfg.max_sigma.powi(2);
            }
        }
        if !any {
            mu = cfg.prior_mean;
            var = cfg.max_sigma.powi(2);
        }
        mean[i] = mu;
        sigma[i] = var.sqrt();
        let cvar = mu + sigma[i] * k;
        severity[i] = if lethal { cvar.max(cfg.lethal_mean) } else { cvar };
        factor_lethal[i] = lethal;
        known[i] = any;
    }
    Ok(CvarMap {
        geometry,
        alpha,
        mean,
        sigma,
        severity,
        factor_lethal,
        known,
        rho_max: cfg.lethal_threshold,
    })
}

impl CvarMap {
    /// Builds a snapshot directly from per-cell Gaussians (all cells known).
    pub fn from_cells(geometry: GridGeometry, cells: &[CellRisk], alpha: f64, rho_max: f64) -> Result<Self> {
        if cells.len() != geometry.len() {
            return Err(CoreError::Shape("cell count".into()));
        }
        let k = tail_factor(alpha)?;
        if cells.iter().any(|c| !(c.sigma >= 0.0) || !c.mu.is_finite()) {
            return Err(CoreError::Domain("cell risk must have finite mean and sigma ≥ 0".into()));
        }
        Ok(Self {
            geometry,
            alpha,
            mean: cells.iter().map(|c| c.mu).collect(),
            sigma: cells.iter().map(|c| c.sigma).collect(),
            severity: cells.iter().map(|c| c.mu + c.sigma * k).collect(),
            factor_lethal: vec![false; cells.len()],
            known: vec![true; cells.len()],
            rho_max,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    pub fn mean(&self, idx: usize) -> f64 {
        self.mean[idx]
    }

    pub fn sigma(&self, idx: usize) -> f64 {
        self.sigma[idx]
    }

    pub fn cvar(&self, idx: usize) -> f64 {
        self.severity[idx]
    }

    pub fn is_known(&self, idx: usize) -> bool {
        self.known[idx]
    }

    pub fn is_lethal(&self, idx: usize) -> bool {
        self.factor_lethal[idx] || (self.known[idx] && self.severity[idx] > self.rho_max)
    }

    pub fn lethal_mask(&self) -> Vec<bool> {
        (0..self.geometry.len()).map(|i| self.is_lethal(i)).collect()
    }

    /// Same risk values under a different lethal threshold.
    pub fn relaxed(&self, rho_max: f64) -> Self {
        Self {
            rho_max,
            ..self.clone()
        }
    }

    /// Same map with every lethal cell in `extra` forced lethal.
    pub fn with_lethal(&self, extra: &[bool]) -> Self {
        let mut out = self.clone();
        for (i, e) in extra.iter().enumerate() {
            if *e {
                out.factor_lethal[i] = true;
                out.severity[i] = out.severity[i].max(1.0);
            }
        }
        out
    }

    /// Bilinear interpolation of the severity between cell centers, clamped at
    /// the border cells.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        let g = &self.geometry;
        let axis = |v: f64, origin: f64, n: usize| -> (usize, usize, f64) {
            let u = ((v - origin) / g.resolution - 0.5).clamp(0.0, (n - 1) as f64);
            let i0 = (u.floor() as usize).min(n.saturating_sub(2));
            let i1 = (i0 + 1).min(n - 1);
            (i0, i1, u - i0 as f64)
        };
        let (x0, x1, tx) = axis(x, g.origin[0], g.width);
        let (y0, y1, ty) = axis(y, g.origin[1], g.height);
        let v = |ix, iy| self.severity[g.index(ix, iy)];
        (1.0 - tx) * (1.0 - ty) * v(x0, y0) + tx * (1.0 - ty) * v(x1, y0) + (1.0 - tx) * ty * v(x0, y1) + tx * ty * v(x1, y1)
    }

    /// Severity at the cell containing `(x, y)`; off-map positions are lethal-valued.
    pub fn at(&self, x: f64, y: f64) -> f64 {
        match self.geometry.cell_at(x, y) {
            Some((ix, iy)) => self.severity[self.geometry.index(ix, iy)],
            None => self.rho_max.max(1.0) * 2.0,
        }
    }

    /// Writes `cvar` and `lethal` layers into a grid map with the same geometry.
    pub fn write_layers(&self, map: &mut BeliefGridMap) -> Result<()> {
        if map.geometry() != &self.geometry {
            return Err(CoreError::Shape("map geometry differs".into()));
        }
        map.set_layer(layers::CVAR, self.severity.clone())?;
        map.set_layer(layers::LETHAL, self.lethal_mask().into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect())?;
        map.set_layer("risk_mean", self.mean.clone())?;
        map.set_layer("risk_sigma", self.sigma.clone())
    }

    /// Rebuilds a snapshot from layers written by [`CvarMap::write_layers`].
    pub fn from_layers(map: &BeliefGridMap, alpha: f64, rho_max: f64) -> Result<Self> {
        let geometry = *map.geometry();
        let severity = map.layer(layers::CVAR)?.to_vec();
        let lethal = map.layer(layers::LETHAL)?;
        let mean = map.layer("risk_mean")?.to_vec();
        let sigma = map.layer("risk_sigma")?.to_vec();
        let n = geometry.len();
        Ok(Self {
            geometry,
            alpha,
            mean,
            sigma,
            factor_lethal: lethal.iter().map(|v| *v != 0.0).collect(),
            severity,
            known: vec![true; n],
            rho_max,
        })
    }
}
