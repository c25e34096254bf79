//! Box-plot summaries and the paired sign test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};
use statrs::statistics::{Data, OrderStatistics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Most extreme samples within 1.5 IQR of the quartiles.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

/// Quartiles (median-unbiased, type 8) and Tukey whiskers. Non-finite
/// samples are dropped; `None` when nothing is left.
pub fn box_stats(samples: &[f64]) -> Option<BoxStats> {
    let mut v: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mut data = Data::new(v.clone());
    let (q1, median, q3) = (data.lower_quartile(), data.median(), data.upper_quartile());
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v.iter().copied().filter(|x| (lo..=hi).contains(x)).collect();
    Some(BoxStats {
        n: v.len(),
        min: v[0],
        q1,
        median,
        q3,
        max: v[v.len() - 1],
        whisker_low: inside.first().copied().unwrap_or(q1),
        whisker_high: inside.last().copied().unwrap_or(q3),
        outliers: v.iter().copied().filter(|x| !(lo..=hi).contains(x)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    /// Pairs with `a < b`.
    pub below: usize,
    pub above: usize,
    pub ties: usize,
    /// One-sided p-value for "a tends to be smaller than b".
    pub p_value: f64,
}

/// Sign test on pairs `(a_i, b_i)`; ties and non-finite pairs are discarded.
pub fn sign_test_less(a: &[f64], b: &[f64]) -> SignTest {
    let (mut below, mut above, mut ties) = (0, 0, 0);
    for (x, y) in a.iter().zip(b) {
        if !x.is_finite() || !y.is_finite() {
            continue;
        }
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => below += 1,
            std::cmp::Ordering::Greater => above += 1,
            std::cmp::Ordering::Equal => ties += 1,
        }
    }
    let n = below + above;
    let p_value = if n == 0 {
        1.0
    } else {
        // P(X >= below) for X ~ Bin(n, 1/2)
        let bin = Binomial::new(0.5, n as u64).expect("valid binomial");
        if below == 0 { 1.0 } else { bin.sf(below as u64 - 1) }
    };
    SignTest { below, above, ties, p_value }
}
