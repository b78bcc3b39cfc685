//! Scripted velocity-command expert: critically damped closed loop over
//! oracle states, used to generate behavior-cloning demos.

use serde::{Deserialize, Serialize};

use super::model::PhaseState;
use super::HenError;
use crate::physics::{step_world_accel, BodyId, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertConfig {
    /// Velocity servo time constant of the controlled plant.
    pub servo_tau: f64,
    /// Max command magnitude (euclidean clamp).
    pub u_max: f64,
    /// Goals farther than this from the origin are declared unreachable.
    pub workspace_radius: f64,
    pub dt: f64,
    /// Success distance for rollouts.
    pub eps: f64,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        ExpertConfig { servo_tau: 0.25, u_max: 2.0, workspace_radius: 50.0, dt: 0.02, eps: 0.05 }
    }
}

impl ExpertConfig {
    /// Critical damping of the closed loop xdotdot = (kp e - xdot) / tau.
    pub fn kp(&self) -> f64 {
        1.0 / (4.0 * self.servo_tau)
    }
}

/// One expert decision with the oracle's state derivative at that instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertAction {
    pub u: [f64; 2],
    pub qdot: [f64; 2],
    pub pdot: [f64; 2],
}

fn clamp_norm(v: [f64; 2], max: f64) -> [f64; 2] {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if n > max {
        [v[0] * max / n, v[1] * max / n]
    } else {
        v
    }
}

/// PD velocity command toward the goal for one body, with the (qdot, pdot)
/// the oracle dynamics produce under that command.
pub fn scripted_expert(
    world: &WorldState,
    body: BodyId,
    goal: [f64; 2],
    cfg: &ExpertConfig,
) -> Result<ExpertAction, HenError> {
    if !goal.iter().all(|g| g.is_finite())
        || (goal[0] * goal[0] + goal[1] * goal[1]).sqrt() > cfg.workspace_radius
    {
        return Err(HenError::UnreachableGoal(format!("goal {goal:?} outside the workspace")));
    }
    let b = world
        .body(body)
        .ok_or_else(|| HenError::Invalid(format!("unknown body {body}")))?;
    let e = [goal[0] - b.position[0], goal[1] - b.position[1]];
    let u = clamp_norm([cfg.kp() * e[0], cfg.kp() * e[1]], cfg.u_max);
    let accel = control_accel(&u, &b.velocity, cfg.servo_tau);
    Ok(ExpertAction {
        u,
        qdot: b.velocity,
        pdot: [b.mass * accel[0], b.mass * (accel[1] - world.gravity)],
    })
}

/// Velocity servo: the plant accelerates toward the commanded velocity.
pub fn control_accel(u: &[f64; 2], velocity: &[f64; 2], servo_tau: f64) -> [f64; 2] {
    [(u[0] - velocity[0]) / servo_tau, (u[1] - velocity[1]) / servo_tau]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertRollout {
    pub steps: Vec<(WorldState, ExpertAction)>,
    pub reached: bool,
    pub steps_to_goal: Option<usize>,
}

/// Roll the expert loop forward; the servo acceleration cancels gravity so
/// the commanded velocity is what the plant tracks.
pub fn expert_rollout(
    world: &WorldState,
    body: BodyId,
    goal: [f64; 2],
    cfg: &ExpertConfig,
    max_steps: usize,
) -> Result<ExpertRollout, HenError> {
    let mut w = world.clone();
    let mut steps = Vec::new();
    let mut reached = None;
    for step in 0..max_steps {
        let act = scripted_expert(&w, body, goal, cfg)?;
        let b = w.body(body).unwrap();
        let dist = ((goal[0] - b.position[0]).powi(2) + (goal[1] - b.position[1]).powi(2)).sqrt();
        if reached.is_none() && dist <= cfg.eps {
            reached = Some(step);
        }
        let mut a = control_accel(&act.u, &b.velocity, cfg.servo_tau);
        a[1] += w.gravity; // gravity compensation, the servo holds altitude
        steps.push((w.clone(), act.clone()));
        w = step_world_accel(&w, cfg.dt, &[(body, a)])?;
    }
    Ok(ExpertRollout { reached: reached.is_some(), steps_to_goal: reached, steps })
}

/// Flat policy input for demos: (q, p, goal) zero-padded to d_rep.
pub fn phase_rep(state: &PhaseState, goal: [f64; 2], d_rep: usize) -> Result<Vec<f64>, HenError> {
    let need = 2 * state.dim() + 2;
    if d_rep < need {
        return Err(HenError::Invalid(format!("d_rep {d_rep} cannot hold {need} features")));
    }
    let mut rep = vec![0.0; d_rep];
    rep[..state.dim()].copy_from_slice(&state.q);
    rep[state.dim()..2 * state.dim()].copy_from_slice(&state.p);
    rep[2 * state.dim()] = goal[0];
    rep[2 * state.dim() + 1] = goal[1];
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::RigidBody;

    fn world_at(pos: [f64; 2], vel: [f64; 2]) -> WorldState {
        WorldState::new(vec![RigidBody::new(0, 1.0, pos, vel, 0.3).unwrap()], 0.0)
    }

    #[test]
    fn at_goal_with_zero_velocity_means_zero_action() {
        let cfg = ExpertConfig::default();
        let a = scripted_expert(&world_at([1.0, 2.0], [0.0; 2]), 0, [1.0, 2.0], &cfg).unwrap();
        assert_eq!(a.u, [0.0, 0.0]);
        assert_eq!(a.qdot, [0.0, 0.0]);
    }

    #[test]
    fn action_points_toward_goal() {
        let cfg = ExpertConfig::default();
        let a = scripted_expert(&world_at([0.0, 0.0], [0.0; 2]), 0, [3.0, -4.0], &cfg).unwrap();
        let inner = a.u[0] * 3.0 + a.u[1] * -4.0;
        assert!(inner > 0.0);
        let n = (a.u[0] * a.u[0] + a.u[1] * a.u[1]).sqrt();
        assert!(n <= cfg.u_max + 1e-12);
    }

    #[test]
    fn unreachable_goal_is_a_declared_failure() {
        let cfg = ExpertConfig::default();
        assert!(scripted_expert(&world_at([0.0; 2], [0.0; 2]), 0, [1000.0, 0.0], &cfg).is_err());
        assert!(scripted_expert(&world_at([0.0; 2], [0.0; 2]), 0, [f64::NAN, 0.0], &cfg).is_err());
    }

    #[test]
    fn expert_reaches_goal_on_open_scenes() {
        let cfg = ExpertConfig::default();
        for (start, goal) in [([0.0, 0.0], [2.0, 1.0]), ([-1.0, 3.0], [1.5, -0.5]), ([4.0, 4.0], [0.0, 0.0])] {
            let r = expert_rollout(&world_at(start, [0.0; 2]), 0, goal, &cfg, 500).unwrap();
            assert!(r.reached, "never reached {goal:?} from {start:?}");
            assert!(r.steps_to_goal.unwrap() <= 500);
        }
    }
}
