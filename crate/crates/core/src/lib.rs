//! Risk-aware navigation: 2.5D risk mapping with CVaR aggregation, A* over
//! the risk map, risk-constrained kinodynamic MPC and recovery behaviors.

pub mod behaviors;
pub mod cvar;
pub mod error;
pub mod grid;
pub mod mpc;
pub mod planner;
pub mod riskmap;

pub use error::{CoreError, Result};
