//! Built-in deterministic crowd simulator: scenarios, social-force pedestrians,
//! a robot with drifting odometry, and pedestrian sensing.

mod log;
mod scenario;
mod sensing;
mod world;

pub use log::{read_trajectory_log, write_trajectory_log, TrajectoryRecord, TRAJECTORY_HEADER};
pub use scenario::{Extent, Lane, Obstacle, RobotSpec, Scenario, SCENARIO_SCHEMA};
pub use sensing::{Frame, MovementObservation, MAX_OBSERVED_SPEED};
pub use world::{AgentState, RobotState, SimParams, World};

/// Loads and validates a scenario from JSON text.
pub fn load_scenario(config_text: &str) -> crate::Result<Scenario> {
    Scenario::from_json(config_text)
}
