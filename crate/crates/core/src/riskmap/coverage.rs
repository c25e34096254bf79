use crate::error::{CoreError, Result};
use crate::grid::{layers, BeliefGridMap, CellView};

/// Streaming coverage statistics per cell.
///
/// A visible cell counts one more viewpoint, moves its running mean viewpoint
/// toward `pos`, and sets `mse = ‖pos − mean‖² − d_cover²`. An occluded cell
/// gets `mse = −d_cover²` and keeps its count and mean. A cell passes coverage
/// once `mse ≥ 0`.
pub fn coverage_update(map: &mut BeliefGridMap, pos: [f64; 2], views: &[CellView], d_cover: f64) -> Result<()> {
    let n = map.geometry().len();
    if views.len() != n {
        return Err(CoreError::Shape(format!("{} views for {n} cells", views.len())));
    }
    let mut count = std::mem::take(map.ensure_layer(layers::COVER_COUNT, 0.0));
    let mut mx = std::mem::take(map.ensure_layer(layers::COVER_MX, f64::NAN));
    let mut my = std::mem::take(map.ensure_layer(layers::COVER_MY, f64::NAN));
    let mut mse = std::mem::take(map.ensure_layer(layers::COVER_MSE, f64::NAN));
    let d2 = d_cover * d_cover;
    for (i, view) in views.iter().enumerate() {
        match view {
            CellView::OutOfRange => {}
            CellView::Occluded => mse[i] = -d2,
            CellView::Visible => {
                count[i] += 1.0;
                if count[i] == 1.0 {
                    mx[i] = pos[0];
                    my[i] = pos[1];
                } else {
                    mx[i] += (pos[0] - mx[i]) / count[i];
                    my[i] += (pos[1] - my[i]) / count[i];
                }
                mse[i] = (pos[0] - mx[i]).powi(2) + (pos[1] - my[i]).powi(2) - d2;
            }
        }
    }
    map.set_layer(layers::COVER_COUNT, count)?;
    map.set_layer(layers::COVER_MX, mx)?;
    map.set_layer(layers::COVER_MY, my)?;
    map.set_layer(layers::COVER_MSE, mse)
}
