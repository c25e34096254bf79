//! Risk-constrained kinodynamic MPC: a trajectory library warm-starts a
//! sequential QP over the linearized dynamics, CVaR cost, signed-distance,
//! orientation and velocity-risk constraints.

mod config;
mod cost;
mod geometry;
mod library;
mod linesearch;
mod model;
mod orientation;
mod planner;
mod qp_build;

pub use config::{LinesearchConfig, MpcConfig, QpConfig, VelocityRiskMode};
pub use cost::{choose_candidate, CostContext};
pub use geometry::{
    decompose_obstacles, in_collision, signed_distance, signed_distance_full, signed_distance_gradient,
    ConvexPolygon, Footprint, SignedDistance,
};
pub use library::{
    follow_controls, generate_trajectory_library, reference_trajectory, shift_controls, stopping_controls,
    LibraryConfig, Trajectory, TrajectorySource,
};
pub use linesearch::{linesearch, LinesearchResult};
pub use model::{
    diff_drive_step, dynamics_step, rollout, wrap_angle, ControlInput, DynamicsModel, Jacobians, Limits,
    RobotState6,
};
pub use orientation::{orientation_and_gradient, Orientation};
pub use planner::{obstacles_near, plan_mpc, IterationInfo, MpcMemory, MpcOutput, MpcStatus};
pub use qp_build::{build_qp, cvar_derivatives, project_psd, velocity_bound, MpcQp, QpLayout, RowGroup};
