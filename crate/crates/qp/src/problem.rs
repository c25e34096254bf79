use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::csr::{CsrMatrix, TripletMatrix};
use crate::QpError;

/// `minimize ½xᵀPx + qᵀx  subject to  l ≤ Ax ≤ u`.
///
/// `p` holds the full symmetric matrix (both triangles). Infinite bounds are
/// allowed; `l[i] == u[i]` encodes an equality row.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub p: CsrMatrix,
    pub q: Vec<f64>,
    pub a: CsrMatrix,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
}

impl QpProblem {
    pub fn new(
        p: CsrMatrix,
        q: Vec<f64>,
        a: CsrMatrix,
        l: Vec<f64>,
        u: Vec<f64>,
    ) -> Result<Self, QpError> {
        let prob = Self { p, q, a, l, u };
        prob.validate()?;
        Ok(prob)
    }

    pub fn num_vars(&self) -> usize {
        self.q.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.l.len()
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.q.len();
        let m = self.l.len();
        if self.p.nrows() != n || self.p.ncols() != n {
            return Err(QpError::Dimension(format!(
                "P is {}x{} but q has {n} entries",
                self.p.nrows(),
                self.p.ncols()
            )));
        }
        if self.a.ncols() != n || self.a.nrows() != m {
            return Err(QpError::Dimension(format!(
                "A is {}x{}, expected {m}x{n}",
                self.a.nrows(),
                self.a.ncols()
            )));
        }
        if self.u.len() != m {
            return Err(QpError::Dimension(format!(
                "l has {m} entries, u has {}",
                self.u.len()
            )));
        }
        if !self.p.all_finite() {
            return Err(QpError::NonFinite("P"));
        }
        if !self.a.all_finite() {
            return Err(QpError::NonFinite("A"));
        }
        if !self.q.iter().all(|v| v.is_finite()) {
            return Err(QpError::NonFinite("q"));
        }
        if self.l.iter().chain(&self.u).any(|v| v.is_nan()) {
            return Err(QpError::NonFinite("bounds"));
        }
        self.p.check_symmetric(1e-9)?;
        for (row, (&lower, &upper)) in self.l.iter().zip(&self.u).enumerate() {
            if lower > upper {
                return Err(QpError::InvertedBounds { row, lower, upper });
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let px = self.p.mul_vec(x);
        0.5 * dot(x, &px) + dot(&self.q, x)
    }

    /// Writes the plain-text problem format: a `dims` header, the lower
    /// triangle of `P` densely row by row, `q`, `A` as triplets, then `l` and `u`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<(), QpError> {
        let n = self.num_vars();
        let m = self.num_constraints();
        let mut s = String::new();
        writeln!(s, "# step-qp problem v1").unwrap();
        writeln!(s, "dims {n} {m}").unwrap();
        writeln!(s, "P").unwrap();
        for i in 0..n {
            let row: Vec<String> = (0..=i).map(|j| fmt_f64(self.p.get(i, j))).collect();
            writeln!(s, "{}", row.join(" ")).unwrap();
        }
        writeln!(s, "q").unwrap();
        writeln!(s, "{}", join(&self.q)).unwrap();
        writeln!(s, "A {}", self.a.nnz()).unwrap();
        for (i, j, v) in self.a.triplets() {
            writeln!(s, "{i} {j} {}", fmt_f64(v)).unwrap();
        }
        writeln!(s, "l").unwrap();
        writeln!(s, "{}", join(&self.l)).unwrap();
        writeln!(s, "u").unwrap();
        writeln!(s, "{}", join(&self.u)).unwrap();
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self, QpError> {
        let mut lines = r
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| match l {
                Ok(s) => !s.trim_start().starts_with('#') && !s.trim().is_empty(),
                Err(_) => true,
            });
        let mut next = |what: &str| -> Result<(usize, String), QpError> {
            match lines.next() {
                Some((i, Ok(s))) => Ok((i, s)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(QpError::Parse {
                    line: 0,
                    msg: format!("unexpected end of file, expected {what}"),
                }),
            }
        };

        let (ln, dims) = next("dims")?;
        let tok: Vec<&str> = dims.split_whitespace().collect();
        if tok.len() != 3 || tok[0] != "dims" {
            return Err(parse_err(ln, "expected `dims <n> <m>`"));
        }
        let n: usize = tok[1].parse().map_err(|_| parse_err(ln, "bad n"))?;
        let m: usize = tok[2].parse().map_err(|_| parse_err(ln, "bad m"))?;

        expect_tag(next("P")?, "P")?;
        let mut p = TripletMatrix::new(n, n);
        for i in 0..n {
            let (ln, row) = next("P row")?;
            let vals = parse_floats(ln, &row)?;
            if vals.len() != i + 1 {
                return Err(parse_err(ln, "P row has wrong length"));
            }
            for (j, v) in vals.into_iter().enumerate() {
                p.push(i, j, v);
                if i != j {
                    p.push(j, i, v);
                }
            }
        }
        expect_tag(next("q")?, "q")?;
        let q = read_vec(next("q values")?, n)?;

        let (ln, head) = next("A header")?;
        let tok: Vec<&str> = head.split_whitespace().collect();
        if tok.len() != 2 || tok[0] != "A" {
            return Err(parse_err(ln, "expected `A <nnz>`"));
        }
        let nnz: usize = tok[1].parse().map_err(|_| parse_err(ln, "bad nnz"))?;
        let mut a = TripletMatrix::new(m, n);
        for _ in 0..nnz {
            let (ln, t) = next("A triplet")?;
            let tok: Vec<&str> = t.split_whitespace().collect();
            if tok.len() != 3 {
                return Err(parse_err(ln, "triplet needs 3 fields"));
            }
            let i: usize = tok[0].parse().map_err(|_| parse_err(ln, "bad row"))?;
            let j: usize = tok[1].parse().map_err(|_| parse_err(ln, "bad col"))?;
            let v: f64 = tok[2].parse().map_err(|_| parse_err(ln, "bad value"))?;
            if i >= m || j >= n {
                return Err(parse_err(ln, "triplet index out of range"));
            }
            a.push(i, j, v);
        }
        expect_tag(next("l")?, "l")?;
        let l = read_vec(next("l values")?, m)?;
        expect_tag(next("u")?, "u")?;
        let u = read_vec(next("u values")?, m)?;
        QpProblem::new(p.to_csr(), q, a.to_csr(), l, u)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn fmt_f64(v: f64) -> String {
    // Display gives the shortest representation that parses back to the same bits.
    format!("{v}")
}

fn join(v: &[f64]) -> String {
    if v.is_empty() {
        return "-".to_string();
    }
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ")
}

fn parse_err(line: usize, msg: &str) -> QpError {
    QpError::Parse {
        line,
        msg: msg.to_string(),
    }
}

fn expect_tag((ln, s): (usize, String), tag: &str) -> Result<(), QpError> {
    if s.trim() == tag {
        Ok(())
    } else {
        Err(parse_err(ln, &format!("expected `{tag}`")))
    }
}

fn parse_floats(ln: usize, s: &str) -> Result<Vec<f64>, QpError> {
    s.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| parse_err(ln, "bad number")))
        .collect()
}

fn read_vec((ln, s): (usize, String), len: usize) -> Result<Vec<f64>, QpError> {
    if len == 0 {
        return if s.trim() == "-" || s.trim().is_empty() {
            Ok(Vec::new())
        } else {
            Err(parse_err(ln, "expected empty vector marker `-`"))
        };
    }
    let v = parse_floats(ln, &s)?;
    if v.len() != len {
        return Err(parse_err(ln, "vector has wrong length"));
    }
    Ok(v)
}
