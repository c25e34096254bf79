/// Plain O(V²) Dijkstra without a heap. `edges(v)` lists `(neighbor, cost)`.
pub fn dijkstra<F>(n: usize, start: usize, edges: F) -> Vec<f64>
where
    F: Fn(usize) -> Vec<(usize, f64)>,
{
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[start] = 0.0;
    loop {
        let mut best = None;
        for v in 0..n {
            if !done[v] && dist[v].is_finite() && best.is_none_or(|b: usize| dist[v] < dist[b]) {
                best = Some(v);
            }
        }
        let Some(v) = best else { break };
        done[v] = true;
        for (w, c) in edges(v) {
            if dist[v] + c < dist[w] {
                dist[w] = dist[v] + c;
            }
        }
    }
    dist
}
