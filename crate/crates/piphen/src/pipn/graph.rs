//! Structured scene graph: nodes are bodies, edges connect pairs within the
//! interaction radius, edge features carry the relative kinematics.

use serde::{Deserialize, Serialize};

use super::PipnError;
use crate::physics::{BodyId, WorldState};

pub const EDGE_FEATURE_WIDTH: usize = 7;
/// Raw per-node features before zero padding:
/// (mass, px, py, vx, vy, orientation, radius).
pub const NODE_FEATURE_WIDTH: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsGraph {
    pub body_ids: Vec<BodyId>,
    pub masses: Vec<f64>,
    /// n rows, each zero-padded to the configured node width.
    pub nodes: Vec<Vec<f64>>,
    /// Sorted neighbor lists; adjacency is symmetric by construction.
    pub neighbors: Vec<Vec<usize>>,
    /// Directed edge features, one row per (i, j) ordered pair with j a
    /// neighbor of i: (rel pos x/y, distance, mass ratio, rel vel x/y,
    /// contact flag).
    pub edge_feats: Vec<Vec<[f64; EDGE_FEATURE_WIDTH]>>,
}

impl PhysicsGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_width(&self) -> usize {
        self.nodes.first().map_or(0, |n| n.len())
    }
}

/// Default interaction radius: 4x the largest body radius in the scene.
pub fn default_radius(scene: &WorldState) -> f64 {
    4.0 * scene.bodies.iter().map(|b| b.radius).fold(0.0, f64::max)
}

pub fn build_graph(scene: &WorldState, radius: f64, node_width: usize) -> Result<PhysicsGraph, PipnError> {
    if radius <= 0.0 {
        return Err(PipnError::Invalid(format!("interaction radius must be > 0, got {radius}")));
    }
    if node_width < NODE_FEATURE_WIDTH {
        return Err(PipnError::Invalid(format!(
            "node width {node_width} cannot hold {NODE_FEATURE_WIDTH} raw features"
        )));
    }
    let n = scene.bodies.len();
    let mut nodes = Vec::with_capacity(n);
    for b in &scene.bodies {
        let mut f = vec![0.0; node_width];
        f[0] = b.mass;
        f[1] = b.position[0];
        f[2] = b.position[1];
        f[3] = b.velocity[0];
        f[4] = b.velocity[1];
        f[5] = b.orientation;
        f[6] = b.radius;
        nodes.push(f);
    }
    let mut neighbors = vec![Vec::new(); n];
    let mut edge_feats = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (bi, bj) = (&scene.bodies[i], &scene.bodies[j]);
            let rel = [bj.position[0] - bi.position[0], bj.position[1] - bi.position[1]];
            let dist = (rel[0] * rel[0] + rel[1] * rel[1]).sqrt();
            if dist > radius {
                continue;
            }
            let contact = if dist <= bi.radius + bj.radius { 1.0 } else { 0.0 };
            neighbors[i].push(j);
            edge_feats[i].push([
                rel[0],
                rel[1],
                dist,
                bi.mass / bj.mass,
                bj.velocity[0] - bi.velocity[0],
                bj.velocity[1] - bi.velocity[1],
                contact,
            ]);
        }
    }
    Ok(PhysicsGraph {
        body_ids: scene.bodies.iter().map(|b| b.id).collect(),
        masses: scene.bodies.iter().map(|b| b.mass).collect(),
        nodes,
        neighbors,
        edge_feats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::RigidBody;

    fn body(id: BodyId, p: [f64; 2], v: [f64; 2]) -> RigidBody {
        RigidBody::new(id, 1.0 + id as f64, p, v, 0.5).unwrap()
    }

    #[test]
    fn distant_bodies_have_no_edges() {
        let scene = WorldState::new(vec![body(0, [0.0, 0.0], [0.0; 2]), body(1, [10.0, 0.0], [0.0; 2])], 0.0);
        let g = build_graph(&scene, 2.0, 16).unwrap();
        assert!(g.neighbors.iter().all(|n| n.is_empty()));
        assert_eq!(g.node_count(), 2);
    }

    #[test]
    fn contact_flag_set_for_touching_pair() {
        let scene = WorldState::new(vec![body(0, [0.0, 0.0], [1.0, 0.0]), body(1, [0.9, 0.0], [0.0; 2])], 0.0);
        let g = build_graph(&scene, 2.0, 16).unwrap();
        assert_eq!(g.neighbors[0], vec![1]);
        let e = g.edge_feats[0][0];
        assert_eq!(e[6], 1.0);
        assert_eq!(e[0], 0.9);
        assert!((e[2] - 0.9).abs() < 1e-12);
        assert_eq!(e[3], 1.0 / 2.0);
        assert_eq!(e[4], -1.0);
    }

    #[test]
    fn empty_scene_gives_empty_graph() {
        let g = build_graph(&WorldState::new(vec![], 0.0), 1.0, 16).unwrap();
        assert_eq!(g.node_count(), 0);
    }

    #[test]
    fn permuting_bodies_permutes_nodes() {
        let a = body(0, [0.0, 0.0], [1.0, 2.0]);
        let b = body(1, [1.0, 0.5], [0.0, -1.0]);
        let g1 = build_graph(&WorldState::new(vec![a.clone(), b.clone()], 0.0), 5.0, 16).unwrap();
        let g2 = build_graph(&WorldState::new(vec![b, a], 0.0), 5.0, 16).unwrap();
        assert_eq!(g1.nodes[0], g2.nodes[1]);
        assert_eq!(g1.nodes[1], g2.nodes[0]);
        assert_eq!(g1.edge_feats[0][0], g2.edge_feats[1][0]);
    }

    #[test]
    fn invalid_inputs_rejected() {
        let scene = WorldState::new(vec![], 0.0);
        assert!(build_graph(&scene, 0.0, 16).is_err());
        assert!(build_graph(&scene, 1.0, 3).is_err());
    }
}
