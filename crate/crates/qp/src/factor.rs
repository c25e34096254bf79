//! Envelope (skyline) Cholesky factorization with reverse Cuthill–McKee ordering.
//!
//! The reduced KKT matrices produced by trajectory optimization problems are
//! banded once variables are reordered by time step, so the envelope stays
//! narrow. Dense problems degrade gracefully to an ordinary dense Cholesky.

use std::collections::VecDeque;

use crate::csr::CsrMatrix;
use crate::QpError;

#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    values: Vec<f64>,
}

/// Reverse Cuthill–McKee ordering of the sparsity graph of a symmetric matrix.
pub fn rcm_ordering(k: &CsrMatrix) -> Vec<usize> {
    let n = k.nrows();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|r| k.row(r).map(|(c, _)| c).filter(|&c| c != r).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_last = |start: usize, visited: &[bool]| -> usize {
        let mut seen = visited.to_vec();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut last = start;
        while let Some(v) = queue.pop_front() {
            last = v;
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        last
    };

    while order.len() < n {
        let seed = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree[v], v))
            .unwrap();
        // Two sweeps approximate a pseudo-peripheral start node.
        let far = bfs_last(seed, &visited);
        let start = bfs_last(far, &visited);

        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

impl EnvelopeCholesky {
    /// Factorizes a symmetric positive definite matrix stored in full (both triangles).
    pub fn factor(k: &CsrMatrix) -> Result<Self, QpError> {
        let n = k.nrows();
        let perm = rcm_ordering(k);
        let mut iperm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (r, c, _) in k.triplets() {
            let (ri, ci) = (iperm[r], iperm[c]);
            if ci < ri {
                first[ri] = first[ri].min(ci);
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + (i - first[i] + 1));
        }
        let mut values = vec![0.0; offset[n]];
        for (r, c, v) in k.triplets() {
            let (ri, ci) = (iperm[r], iperm[c]);
            if ci <= ri {
                values[offset[ri] + ci - first[ri]] += v;
            }
        }

        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let start = fi.max(fj);
                let mut s = values[offset[i] + j - fi];
                let row_i = &values[offset[i] + start - fi..offset[i] + j - fi];
                let row_j = &values[offset[j] + start - fj..offset[j] + j - fj];
                s -= row_i.iter().zip(row_j).map(|(a, b)| a * b).sum::<f64>();
                if j < i {
                    let djj = values[offset[j + 1] - 1];
                    values[offset[i] + j - fi] = s / djj;
                } else {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(QpError::Factorization {
                            index: perm[i],
                            pivot: s,
                        });
                    }
                    values[offset[i] + j - fi] = s.sqrt();
                }
            }
        }
        Ok(Self {
            n,
            perm,
            first,
            offset,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    /// Solves `K x = b` in place, using `work` (length n) as scratch.
    pub fn solve_in_place(&self, b: &mut [f64], work: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            work[i] = b[self.perm[i]];
        }
        // L y = b
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            let mut s = work[i];
            for (k, l) in row[..row.len() - 1].iter().enumerate() {
                s -= l * work[fi + k];
            }
            work[i] = s / row[row.len() - 1];
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            let xi = work[i] / row[row.len() - 1];
            work[i] = xi;
            for (k, l) in row[..row.len() - 1].iter().enumerate() {
                work[fi + k] -= l * xi;
            }
        }
        for i in 0..n {
            b[self.perm[i]] = work[i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        let mut work = vec![0.0; self.n];
        self.solve_in_place(&mut x, &mut work);
        x
    }
}
