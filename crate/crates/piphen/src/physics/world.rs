use serde::{Deserialize, Serialize};

use super::PhysicsError;

pub type BodyId = u32;

/// Sphere rigid body in the 2-D world. The y coordinate is the gravity axis,
/// so `height()` is simply `position[1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidBody {
    pub id: BodyId,
    pub mass: f64,
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub orientation: f64,
    pub angular_velocity: f64,
    pub radius: f64,
}

impl RigidBody {
    pub fn new(id: BodyId, mass: f64, position: [f64; 2], velocity: [f64; 2], radius: f64) -> Result<Self, PhysicsError> {
        if mass <= 0.0 {
            return Err(PhysicsError::InvalidBody(format!("body {id}: mass must be > 0, got {mass}")));
        }
        if radius <= 0.0 {
            return Err(PhysicsError::InvalidBody(format!("body {id}: radius must be > 0, got {radius}")));
        }
        Ok(RigidBody { id, mass, position, velocity, orientation: 0.0, angular_velocity: 0.0, radius })
    }

    pub fn height(&self) -> f64 {
        self.position[1]
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.mass * (self.velocity[0] * self.velocity[0] + self.velocity[1] * self.velocity[1])
    }
}

/// One resolved elastic collision, with pre/post velocities of both bodies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub body_i: BodyId,
    pub body_j: BodyId,
    pub t_pre: f64,
    pub t_post: f64,
    pub v_i_pre: [f64; 2],
    pub v_j_pre: [f64; 2],
    pub v_i_post: [f64; 2],
    pub v_j_post: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub bodies: Vec<RigidBody>,
    /// Gravitational acceleration magnitude (m/s²), pulling toward −y.
    pub gravity: f64,
    pub time: f64,
    pub collision_events: Vec<CollisionEvent>,
}

impl WorldState {
    pub fn new(bodies: Vec<RigidBody>, gravity: f64) -> Self {
        WorldState { bodies, gravity, time: 0.0, collision_events: Vec::new() }
    }

    pub fn body(&self, id: BodyId) -> Option<&RigidBody> {
        self.bodies.iter().find(|b| b.id == id)
    }

    pub fn body_mut(&mut self, id: BodyId) -> Option<&mut RigidBody> {
        self.bodies.iter_mut().find(|b| b.id == id)
    }
}

/// Σ ½mᵢvᵢ² + mᵢ·g·hᵢ, with height measured along the gravity axis.
pub fn total_energy(world: &WorldState) -> f64 {
    world
        .bodies
        .iter()
        .map(|b| b.kinetic_energy() + b.mass * world.gravity * b.height())
        .sum()
}

/// Σ mᵢvᵢ.
pub fn total_momentum(world: &WorldState) -> [f64; 2] {
    let mut p = [0.0, 0.0];
    for b in &world.bodies {
        p[0] += b.mass * b.velocity[0];
        p[1] += b.mass * b.velocity[1];
    }
    p
}

const CONTACT_TOLERANCE: f64 = 1e-9;

/// Advance the world by `dt`. Free flight is integrated exactly (constant
/// gravitational acceleration), then sphere-sphere contacts are resolved as
/// perfectly elastic impulse exchanges and recorded.
pub fn step_world(world: &WorldState, dt: f64) -> Result<WorldState, PhysicsError> {
    step_world_accel(world, dt, &[])
}

/// Like [`step_world`] but with per-body extra accelerations (control
/// inputs), held constant across the step.
pub fn step_world_accel(
    world: &WorldState,
    dt: f64,
    accels: &[(BodyId, [f64; 2])],
) -> Result<WorldState, PhysicsError> {
    if dt <= 0.0 {
        return Err(PhysicsError::InvalidStep(format!("dt must be > 0, got {dt}")));
    }
    let mut next = world.clone();
    let t_pre = world.time;
    next.time = t_pre + dt;
    for body in &mut next.bodies {
        let mut a = [0.0, -world.gravity];
        if let Some((_, extra)) = accels.iter().find(|(id, _)| *id == body.id) {
            a[0] += extra[0];
            a[1] += extra[1];
        }
        body.position[0] += body.velocity[0] * dt + 0.5 * a[0] * dt * dt;
        body.position[1] += body.velocity[1] * dt + 0.5 * a[1] * dt * dt;
        body.velocity[0] += a[0] * dt;
        body.velocity[1] += a[1] * dt;
        body.orientation += body.angular_velocity * dt;
    }
    resolve_collisions(&mut next, t_pre, dt);
    Ok(next)
}

fn resolve_collisions(world: &mut WorldState, t_pre: f64, dt: f64) {
    let n = world.bodies.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let (pi, pj) = (world.bodies[i].position, world.bodies[j].position);
            let d = [pj[0] - pi[0], pj[1] - pi[1]];
            let dist = (d[0] * d[0] + d[1] * d[1]).sqrt();
            let touch = world.bodies[i].radius + world.bodies[j].radius;
            if dist >= touch || dist == 0.0 {
                continue;
            }
            let normal = [d[0] / dist, d[1] / dist];
            let (vi, vj) = (world.bodies[i].velocity, world.bodies[j].velocity);
            let rel = (vj[0] - vi[0]) * normal[0] + (vj[1] - vi[1]) * normal[1];
            if rel >= 0.0 {
                continue; // separating already
            }
            let (mi, mj) = (world.bodies[i].mass, world.bodies[j].mass);
            // perfectly elastic impulse (restitution 1)
            let impulse = -2.0 * rel / (1.0 / mi + 1.0 / mj);
            let v_i_post = [
                vi[0] - impulse * normal[0] / mi,
                vi[1] - impulse * normal[1] / mi,
            ];
            let v_j_post = [
                vj[0] + impulse * normal[0] / mj,
                vj[1] + impulse * normal[1] / mj,
            ];
            world.bodies[i].velocity = v_i_post;
            world.bodies[j].velocity = v_j_post;
            // minimal positional de-penetration, split by inverse mass
            let overlap = touch - dist + CONTACT_TOLERANCE;
            let inv_sum = 1.0 / mi + 1.0 / mj;
            let push_i = overlap * (1.0 / mi) / inv_sum;
            let push_j = overlap * (1.0 / mj) / inv_sum;
            world.bodies[i].position[0] -= normal[0] * push_i;
            world.bodies[i].position[1] -= normal[1] * push_i;
            world.bodies[j].position[0] += normal[0] * push_j;
            world.bodies[j].position[1] += normal[1] * push_j;
            let event = CollisionEvent {
                body_i: world.bodies[i].id,
                body_j: world.bodies[j].id,
                t_pre,
                t_post: t_pre + dt,
                v_i_pre: vi,
                v_j_pre: vj,
                v_i_post,
                v_j_post,
            };
            world.collision_events.push(event);
        }
    }
}

/// One recorded body state inside a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyRecord {
    pub id: BodyId,
    pub position: [f64; 2],
    pub orientation: f64,
    pub velocity: [f64; 2],
}

/// Ordered ground-truth states over T ≥ 2 timesteps with a uniform dt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub body_ids: Vec<BodyId>,
    pub masses: Vec<f64>,
    /// states[t][k] is the record for body_ids[k] at step t.
    pub states: Vec<Vec<BodyRecord>>,
    /// Collision events accumulated along the rollout.
    pub events: Vec<CollisionEvent>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Total energy of the recorded state at step t (gravity supplied by the
    /// caller since the trajectory itself stores only kinematics).
    pub fn energy_at(&self, t: usize, gravity: f64) -> f64 {
        self.states[t]
            .iter()
            .zip(&self.masses)
            .map(|(r, &m)| {
                let v2 = r.velocity[0] * r.velocity[0] + r.velocity[1] * r.velocity[1];
                0.5 * m * v2 + m * gravity * r.position[1]
            })
            .sum()
    }
}

fn record_state(world: &WorldState) -> Vec<BodyRecord> {
    world
        .bodies
        .iter()
        .map(|b| BodyRecord {
            id: b.id,
            position: b.position,
            orientation: b.orientation,
            velocity: b.velocity,
        })
        .collect()
}

/// Exact rollout of [`step_world`]: the training-label generator and the
/// source for the oracle ablation mode. The returned trajectory includes the
/// initial state, so it has `horizon + 1` steps.
pub fn oracle_future(world: &WorldState, horizon: usize, dt: f64) -> Result<Trajectory, PhysicsError> {
    if horizon == 0 {
        return Err(PhysicsError::InvalidStep("horizon must be >= 1".into()));
    }
    let mut current = world.clone();
    current.collision_events.clear();
    let mut states = vec![record_state(&current)];
    for _ in 0..horizon {
        current = step_world(&current, dt)?;
        states.push(record_state(&current));
    }
    Ok(Trajectory {
        dt,
        body_ids: world.bodies.iter().map(|b| b.id).collect(),
        masses: world.bodies.iter().map(|b| b.mass).collect(),
        states,
        events: current.collision_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body(id: BodyId, mass: f64, p: [f64; 2], v: [f64; 2]) -> RigidBody {
        RigidBody::new(id, mass, p, v, 0.5).unwrap()
    }

    #[test]
    fn free_body_advances_linearly() {
        let world = WorldState::new(vec![body(0, 1.0, [0.0, 0.0], [1.0, 0.0])], 0.0);
        let next = step_world(&world, 1.0).unwrap();
        assert_eq!(next.bodies[0].position, [1.0, 0.0]);
        assert!(next.collision_events.is_empty());
    }

    #[test]
    fn equal_mass_head_on_swap() {
        let world = WorldState::new(
            vec![
                body(0, 1.0, [-0.6, 0.0], [1.0, 0.0]),
                body(1, 1.0, [0.6, 0.0], [-1.0, 0.0]),
            ],
            0.0,
        );
        let mut w = world;
        for _ in 0..100 {
            w = step_world(&w, 0.01).unwrap();
        }
        assert_eq!(w.collision_events.len(), 1);
        assert!((w.bodies[0].velocity[0] + 1.0).abs() < 1e-12);
        assert!((w.bodies[1].velocity[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn free_fall_energy_drift_tiny() {
        let world = WorldState::new(vec![body(0, 2.0, [0.0, 50.0], [3.0, 0.0])], 9.81);
        let e0 = total_energy(&world);
        let mut w = world;
        for _ in 0..100 {
            w = step_world(&w, 0.01).unwrap();
        }
        let e1 = total_energy(&w);
        assert!(((e1 - e0) / e0).abs() < 1e-6, "relative drift {}", ((e1 - e0) / e0).abs());
    }

    #[test]
    fn thousand_step_energy_drift() {
        let world = WorldState::new(vec![body(0, 1.5, [0.0, 100.0], [2.0, 5.0])], 9.81);
        let e0 = total_energy(&world);
        let mut w = world;
        for _ in 0..1000 {
            w = step_world(&w, 0.01).unwrap();
        }
        assert!(((total_energy(&w) - e0) / e0).abs() < 1e-6);
    }

    #[test]
    fn energy_formula_substitution() {
        let w = WorldState::new(vec![body(0, 2.0, [0.0, 0.0], [3.0, 0.0])], 9.81);
        assert!((total_energy(&w) - 9.0).abs() < 1e-12);
        let w2 = WorldState::new(vec![body(0, 1.0, [0.0, 10.0], [0.0, 0.0])], 9.81);
        assert!((total_energy(&w2) - 98.1).abs() < 1e-12);
        let empty = WorldState::new(vec![], 9.81);
        assert_eq!(total_energy(&empty), 0.0);
    }

    #[test]
    fn momentum_formula() {
        let w = WorldState::new(
            vec![body(0, 1.0, [-2.0, 0.0], [1.0, 0.0]), body(1, 1.0, [2.0, 0.0], [-1.0, 0.0])],
            0.0,
        );
        assert_eq!(total_momentum(&w), [0.0, 0.0]);
        assert_eq!(total_momentum(&WorldState::new(vec![], 9.81)), [0.0, 0.0]);
    }

    #[test]
    fn momentum_conserved_across_random_collisions() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let world = WorldState::new(
                vec![
                    RigidBody::new(
                        0,
                        rng.gen_range(0.5..3.0),
                        [rng.gen_range(-1.0..0.0), rng.gen_range(-0.2..0.2)],
                        [rng.gen_range(0.5..2.0), rng.gen_range(-0.5..0.5)],
                        0.5,
                    )
                    .unwrap(),
                    RigidBody::new(
                        1,
                        rng.gen_range(0.5..3.0),
                        [rng.gen_range(0.5..1.5), rng.gen_range(-0.2..0.2)],
                        [rng.gen_range(-2.0..-0.5), rng.gen_range(-0.5..0.5)],
                        0.5,
                    )
                    .unwrap(),
                ],
                0.0,
            );
            let p0 = total_momentum(&world);
            let mut w = world;
            for _ in 0..200 {
                w = step_world(&w, 0.01).unwrap();
            }
            let p1 = total_momentum(&w);
            assert!((p1[0] - p0[0]).abs() < 1e-9 && (p1[1] - p0[1]).abs() < 1e-9);
            for ev in &w.collision_events {
                let (mi, mj) = (w.body(ev.body_i).unwrap().mass, w.body(ev.body_j).unwrap().mass);
                for axis in 0..2 {
                    let pre = mi * ev.v_i_pre[axis] + mj * ev.v_j_pre[axis];
                    let post = mi * ev.v_i_post[axis] + mj * ev.v_j_post[axis];
                    assert!((pre - post).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn oracle_future_matches_stepping_and_is_deterministic() {
        let world = WorldState::new(vec![body(0, 1.0, [0.0, 10.0], [1.0, 0.0])], 9.81);
        let traj = oracle_future(&world, 1, 0.01).unwrap();
        let stepped = step_world(&world, 0.01).unwrap();
        assert_eq!(traj.states[1][0].position, stepped.bodies[0].position);
        let traj2 = oracle_future(&world, 1, 0.01).unwrap();
        assert_eq!(traj, traj2);
    }

    #[test]
    fn oracle_trajectory_energy_drift() {
        let world = WorldState::new(vec![body(0, 1.0, [0.0, 100.0], [1.0, 2.0])], 9.81);
        let traj = oracle_future(&world, 500, 0.01).unwrap();
        let e0 = traj.energy_at(0, 9.81);
        for t in 0..traj.len() {
            assert!(((traj.energy_at(t, 9.81) - e0) / e0).abs() < 1e-6);
        }
    }

    #[test]
    fn invalid_bodies_rejected() {
        assert!(RigidBody::new(0, 0.0, [0.0; 2], [0.0; 2], 1.0).is_err());
        assert!(RigidBody::new(0, 1.0, [0.0; 2], [0.0; 2], 0.0).is_err());
        let w = WorldState::new(vec![], 9.81);
        assert!(step_world(&w, 0.0).is_err());
    }
}
