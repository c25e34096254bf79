//! Dense-free convex QP solver used by the kinodynamic planner.
//!
//! Problems take the form `minimize ½xᵀPx + qᵀx subject to l ≤ Ax ≤ u` and
//! are solved with an ADMM iteration over Ruiz-equilibrated data.

mod admm;
mod csr;
mod error;
mod factor;
mod problem;

pub use admm::{solve_qp, AdmmSettings, QpSolution, QpStatus, WarmStart};
pub use csr::{CsrMatrix, TripletMatrix};
pub use error::QpError;
pub use factor::{rcm_ordering, EnvelopeCholesky};
pub use problem::QpProblem;
