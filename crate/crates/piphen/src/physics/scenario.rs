//! Versioned on-disk formats: scenario files that seed either world, and
//! flat trajectory dumps for training data. Loading rejects unknown versions
//! instead of guessing.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sar::SarGrid;
use super::world::{BodyId, Trajectory, WorldState};
use super::PhysicsError;

pub const SCENARIO_VERSION: u32 = 1;

/// Either kind of simulated environment, tagged so one loader serves both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ScenarioBody {
    Rigid { world: WorldState, dt: f64, horizon: usize },
    Sar { grid: SarGrid, horizon: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    #[serde(flatten)]
    pub body: ScenarioBody,
}

impl Scenario {
    pub fn rigid(name: &str, world: WorldState, dt: f64, horizon: usize) -> Self {
        Scenario {
            version: SCENARIO_VERSION,
            name: name.to_string(),
            body: ScenarioBody::Rigid { world, dt, horizon },
        }
    }

    pub fn sar(name: &str, grid: SarGrid, horizon: usize) -> Self {
        Scenario { version: SCENARIO_VERSION, name: name.to_string(), body: ScenarioBody::Sar { grid, horizon } }
    }
}

pub fn save_scenario(path: &Path, scenario: &Scenario) -> Result<(), PhysicsError> {
    let text = serde_json::to_string_pretty(scenario).map_err(|e| PhysicsError::Format(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_scenario(path: &Path) -> Result<Scenario, PhysicsError> {
    let text = fs::read_to_string(path)?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, PhysicsError> {
    // check the version before full decoding so new fields in future
    // versions produce a version error rather than a parse error
    #[derive(Deserialize)]
    struct Header {
        version: u32,
    }
    let header: Header = serde_json::from_str(text).map_err(|e| PhysicsError::Format(e.to_string()))?;
    if header.version != SCENARIO_VERSION {
        return Err(PhysicsError::Format(format!(
            "unsupported scenario version {} (expected {SCENARIO_VERSION})",
            header.version
        )));
    }
    serde_json::from_str(text).map_err(|e| PhysicsError::Format(e.to_string()))
}

/// One row of a trajectory dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub id: BodyId,
    pub position: [f64; 2],
    pub orientation: f64,
    pub velocity: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDump {
    pub version: u32,
    pub dt: f64,
    pub body_ids: Vec<BodyId>,
    pub masses: Vec<f64>,
    /// Ordered by (t, id); readers may rely on this.
    pub records: Vec<TrajectoryRecord>,
}

pub fn dump_trajectory(traj: &Trajectory) -> TrajectoryDump {
    let mut records = Vec::with_capacity(traj.len() * traj.body_ids.len());
    for (t, state) in traj.states.iter().enumerate() {
        for r in state {
            records.push(TrajectoryRecord {
                t,
                id: r.id,
                position: r.position,
                orientation: r.orientation,
                velocity: r.velocity,
            });
        }
    }
    records.sort_by_key(|r| (r.t, r.id));
    TrajectoryDump {
        version: SCENARIO_VERSION,
        dt: traj.dt,
        body_ids: traj.body_ids.clone(),
        masses: traj.masses.clone(),
        records,
    }
}

pub fn save_trajectory(path: &Path, traj: &Trajectory) -> Result<(), PhysicsError> {
    let dump = dump_trajectory(traj);
    let text = serde_json::to_string(&dump).map_err(|e| PhysicsError::Format(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_trajectory(path: &Path) -> Result<TrajectoryDump, PhysicsError> {
    let text = fs::read_to_string(path)?;
    let dump: TrajectoryDump = serde_json::from_str(&text).map_err(|e| PhysicsError::Format(e.to_string()))?;
    if dump.version != SCENARIO_VERSION {
        return Err(PhysicsError::Format(format!(
            "unsupported trajectory version {} (expected {SCENARIO_VERSION})",
            dump.version
        )));
    }
    Ok(dump)
}
