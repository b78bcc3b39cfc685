//! Node topology and loadable capability modules.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::semcom::{decode_frame, encode_frame, FrameKind, NetSim};

use super::OrchestratorError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeRole {
    /// Global fusion and strategy. Exactly one per run.
    Brain,
    /// Local prediction and control for one robot. Exactly one per robot.
    Cerebellum(u32),
    /// A loadable specialized capability.
    MicroBrain(String),
}

/// Static node membership for one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    /// node id -> role
    pub roles: BTreeMap<u32, NodeRole>,
}

impl Topology {
    /// Checks the structural invariants: exactly one Brain, and no robot
    /// with more than one Cerebellum.
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let brains = self.roles.values().filter(|r| **r == NodeRole::Brain).count();
        if brains != 1 {
            return Err(OrchestratorError::Invalid(format!(
                "topology needs exactly one brain, found {brains}"
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for role in self.roles.values() {
            if let NodeRole::Cerebellum(robot) = role {
                if !seen.insert(*robot) {
                    return Err(OrchestratorError::Invalid(format!(
                        "robot {robot} has more than one cerebellum"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn brain_node(&self) -> u32 {
        *self
            .roles
            .iter()
            .find(|(_, r)| **r == NodeRole::Brain)
            .expect("validated topology has a brain")
            .0
    }
}

type Handler = Box<dyn Fn(&[u8]) -> Vec<u8>>;

/// Capability modules that can be loaded, unloaded and invoked, locally or
/// across the simulated network.
#[derive(Default)]
pub struct CapabilityRegistry {
    caps: BTreeMap<String, (bool, Handler)>,
}

impl CapabilityRegistry {
    pub fn new() -> Self {
        CapabilityRegistry::default()
    }

    /// Register a capability in the loaded state.
    pub fn register(&mut self, name: impl Into<String>, handler: Handler) {
        self.caps.insert(name.into(), (true, handler));
    }

    pub fn load_capability(&mut self, name: &str) -> Result<(), OrchestratorError> {
        match self.caps.get_mut(name) {
            Some((loaded, _)) => {
                *loaded = true;
                Ok(())
            }
            None => Err(OrchestratorError::CapabilityNotFound(name.to_string())),
        }
    }

    pub fn unload_capability(&mut self, name: &str) -> Result<(), OrchestratorError> {
        match self.caps.get_mut(name) {
            Some((loaded, _)) => {
                *loaded = false;
                Ok(())
            }
            None => Err(OrchestratorError::CapabilityNotFound(name.to_string())),
        }
    }

    pub fn invoke_local(&self, name: &str, args: &[u8]) -> Result<Vec<u8>, OrchestratorError> {
        match self.caps.get(name) {
            Some((true, handler)) => Ok(handler(args)),
            Some((false, _)) => Err(OrchestratorError::CapabilityUnavailable(name.to_string())),
            None => Err(OrchestratorError::CapabilityNotFound(name.to_string())),
        }
    }
}

/// Invoke a capability hosted on another node. Adds exactly one request and
/// one response message to the network accounting; returns the result and
/// the simulated round-trip time in microseconds.
pub fn invoke_remote(
    sim: &mut NetSim,
    src: u32,
    dst: u32,
    registry_at_dst: &CapabilityRegistry,
    name: &str,
    args: &[u8],
) -> Result<(Vec<u8>, u64), OrchestratorError> {
    let start = sim.now_us();
    let mut request = name.as_bytes().to_vec();
    request.push(0);
    request.extend_from_slice(args);
    sim.net_send(src, dst, encode_frame(FrameKind::Request, &request))?;
    let delivered = sim.net_run();
    let req = delivered.last().expect("request in flight");
    let (kind, payload, _) = decode_frame(&req.payload)?;
    debug_assert_eq!(kind, FrameKind::Request);
    let split = payload.iter().position(|&b| b == 0).expect("separator present");
    let result = registry_at_dst
        .invoke_local(std::str::from_utf8(&payload[..split]).unwrap_or(""), &payload[split + 1..])?;
    sim.net_send(dst, src, encode_frame(FrameKind::Response, &result))?;
    let back = sim.net_run();
    let (_, response, _) = decode_frame(&back.last().expect("response in flight").payload)?;
    Ok((response.to_vec(), sim.now_us() - start))
}
