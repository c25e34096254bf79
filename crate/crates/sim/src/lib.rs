//! Closed-loop simulation of the risk-aware navigation stack: synthetic
//! worlds, a noisy range sensor, single episodes and the Monte Carlo study
//! comparing risk levels.

pub mod config;
pub mod episode;
pub mod io;
pub mod sensor;
pub mod stats;
pub mod study;
pub mod world;

pub use config::{EpisodeConfig, SimConfig};
pub use episode::{run_episode, Belief, EpisodeRecord, EpisodeTrace, Termination, TraceRow};
pub use sensor::{sensor_model, Observation, SensorConfig, SensorFrame};
pub use study::{monte_carlo, Study, StudyResult};
pub use world::{gen_world, with_start_goal, CellKind, World, WorldSpec};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("{0}")]
    Spec(String),
    #[error(transparent)]
    Core(#[from] step_core::CoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Config(String),
}
