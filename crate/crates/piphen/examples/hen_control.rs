//! Behavior-clone the scripted reach expert, with and without the energy
//! drift penalty, and compare the learned Hamiltonian's drift along demos.

use piphen::autodiff::OptimConfig;
use piphen::hen::{
    collect_demos, control_accel, mean_abs_dhdt, phase_rep, policy, train_hen, ExpertConfig,
    HenConfig, HenTrainConfig, PhaseState,
};
use piphen::physics::{step_world_accel, RigidBody, WorldState};

fn main() {
    let expert = ExpertConfig { u_max: 1.0, dt: 0.02, ..Default::default() };
    let world =
        WorldState::new(vec![RigidBody::new(1, 1.0, [0.0, 0.0], [0.0, 0.0], 0.3).unwrap()], 9.81);
    let arch = HenConfig::small();
    let mut demos = Vec::new();
    for (i, goal) in [[1.5, 1.0], [-1.0, 2.0], [2.0, -0.5]].iter().enumerate() {
        let all = collect_demos(&world, 1, *goal, &expert, arch.d_rep, 300).unwrap();
        demos.extend(all.into_iter().skip(i).step_by(12));
    }
    println!("{} demo steps", demos.len());

    let base = HenTrainConfig {
        steps: 60,
        seed: 5,
        optim: OptimConfig { lr: 3e-3, ..Default::default() },
        ..Default::default()
    };
    let with = train_hen(&demos, &arch, &base).unwrap();
    let without =
        train_hen(&demos, &HenConfig { lambda: 0.0, ..arch.clone() }, &base).unwrap();

    let drift_with = mean_abs_dhdt(&with.model, &demos).unwrap();
    let drift_without = mean_abs_dhdt(&without.model, &demos).unwrap();
    println!("mean |dH/dt| with penalty:    {drift_with:.4}");
    println!("mean |dH/dt| without penalty: {drift_without:.4}");

    // closed-loop rollout under the trained policy
    let goal = [1.5, 1.0];
    let mut w = world.clone();
    for _ in 0..400 {
        let b = w.body(1).unwrap();
        let state = PhaseState::new(
            b.position.to_vec(),
            vec![b.mass * b.velocity[0], b.mass * b.velocity[1]],
        )
        .unwrap();
        let rep = phase_rep(&state, goal, arch.d_rep).unwrap();
        let u = policy(&with.model, &rep).unwrap();
        let mut a = control_accel(&[u[0], u[1]], &b.velocity, expert.servo_tau);
        a[1] += w.gravity;
        w = step_world_accel(&w, expert.dt, &[(1, a)]).unwrap();
    }
    let b = w.body(1).unwrap();
    let dist = ((b.position[0] - goal[0]).powi(2) + (b.position[1] - goal[1]).powi(2)).sqrt();
    println!("distance to goal after rollout: {dist:.3}");
}
