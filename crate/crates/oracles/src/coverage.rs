/// Recomputes the coverage statistics of one cell from its full history.
///
/// `history` holds `Some(position)` for an unoccluded observation and `None`
/// for an occluded one. Returns `(count, mean, mse)`; `mean` is `None` before
/// the first unoccluded observation and `mse` is `None` before any update.
pub fn replay(history: &[Option<[f64; 2]>], d_cover: f64) -> (usize, Option<[f64; 2]>, Option<f64>) {
    let mut seen: Vec<[f64; 2]> = Vec::new();
    let mut mse = None;
    for obs in history {
        match obs {
            Some(p) => {
                seen.push(*p);
                let n = seen.len() as f64;
                let mx = seen.iter().map(|v| v[0]).sum::<f64>() / n;
                let my = seen.iter().map(|v| v[1]).sum::<f64>() / n;
                mse = Some((p[0] - mx).powi(2) + (p[1] - my).powi(2) - d_cover * d_cover);
            }
            None => mse = Some(-d_cover * d_cover),
        }
    }
    let mean = (!seen.is_empty()).then(|| {
        let n = seen.len() as f64;
        [
            seen.iter().map(|v| v[0]).sum::<f64>() / n,
            seen.iter().map(|v| v[1]).sum::<f64>() / n,
        ]
    });
    (seen.len(), mean, mse)
}
