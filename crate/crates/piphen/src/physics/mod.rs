//! Ground-truth simulators: a rigid-body world with exact free-flight
//! integration and elastic contacts, and a search-and-rescue grid world.
//! Both are deterministic given their inputs and seeds, which makes them
//! usable as label generators and as conservation-check oracles.

pub mod sar;
pub mod scenario;
pub mod world;

pub use sar::{
    observe_sar, step_sar, ActionFailure, AgentId, Cell, Dir, Resource, SarAction, SarAgent, SarGrid,
    SarObservation, SarStepResult, VisibleObject, MAX_FIRE_INTENSITY,
};
pub use scenario::{
    dump_trajectory, load_scenario, load_trajectory, parse_scenario, save_scenario, save_trajectory, Scenario,
    ScenarioBody, TrajectoryDump, TrajectoryRecord, SCENARIO_VERSION,
};
pub use world::{
    oracle_future, step_world, step_world_accel, total_energy, total_momentum, BodyId, BodyRecord,
    CollisionEvent, RigidBody, Trajectory, WorldState,
};

#[derive(Debug, thiserror::Error)]
pub enum PhysicsError {
    #[error("invalid body: {0}")]
    InvalidBody(String),
    #[error("invalid step: {0}")]
    InvalidStep(String),
    #[error("unknown agent {0}")]
    UnknownAgent(u32),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
