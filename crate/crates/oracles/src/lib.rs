//! Brute-force reference computations. Nothing here shares code with the
//! production crates; inputs and outputs are plain numbers and slices.

pub mod coverage;
pub mod geometry;
pub mod gen;
pub mod graph;
pub mod qp;
pub mod risk;

/// Composite Simpson rule with `panels` (rounded up to even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}
