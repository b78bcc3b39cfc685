//! Exact two-body rollout: energy stays flat between contacts and linear
//! momentum is exchanged, not created, at each collision.

use piphen::physics::{oracle_future, total_momentum, RigidBody, WorldState};

fn main() {
    let world = WorldState::new(
        vec![
            RigidBody::new(1, 1.0, [0.0, 3.0], [1.2, 0.0], 0.3).unwrap(),
            RigidBody::new(2, 2.0, [2.0, 3.0], [-0.8, 0.0], 0.3).unwrap(),
        ],
        9.81,
    );
    let p0 = total_momentum(&world);
    println!("initial momentum = [{:.4}, {:.4}]", p0[0], p0[1]);

    let traj = oracle_future(&world, 400, 0.005).unwrap();
    let e0 = traj.energy_at(0, world.gravity);
    let e_end = traj.energy_at(traj.len() - 1, world.gravity);
    println!("energy drift over {} steps: {:.3e}", traj.len() - 1, (e_end - e0).abs());

    for ev in &traj.events {
        println!(
            "contact at t = {:.3}s between bodies {} and {}",
            ev.t_post, ev.body_i, ev.body_j
        );
    }
    assert!((e_end - e0).abs() < 1e-9);
    assert!(!traj.events.is_empty(), "the bodies were aimed at each other");
}
