//! Train a small prediction network on oracle rollouts, then decompose its
//! predictive uncertainty into perception, model, and environment parts.

use piphen::pipn::{
    default_radius, default_task_tokens, estimate_uncertainty, make_dataset, scenes_from_trajectory,
    train_pipn, PipnConfig, PipnTrainConfig,
};
use piphen::physics::{RigidBody, WorldState};

fn main() {
    let scene = WorldState::new(
        vec![
            RigidBody::new(1, 1.0, [0.0, 5.0], [0.5, 0.0], 0.3).unwrap(),
            RigidBody::new(2, 2.0, [1.0, 5.2], [-0.4, 0.2], 0.3).unwrap(),
        ],
        9.81,
    );
    let dataset = make_dataset(&[scene.clone()], 4, 0.05).unwrap();
    let arch = PipnConfig { dropout: 0.1, ..PipnConfig::small() };

    // a two-member ensemble is enough to get a nonzero model term
    let mut members = Vec::new();
    for seed in [3, 4] {
        let cfg = PipnTrainConfig { steps: 20, seed, ..Default::default() };
        let (model, curve) = train_pipn(&dataset, &arch, &cfg).unwrap();
        println!(
            "member seed {seed}: loss {:.4} -> {:.4}",
            curve.first().unwrap(),
            curve.last().unwrap()
        );
        members.push(model);
    }

    let sample = &dataset[0];
    let scenes = scenes_from_trajectory(&sample.scene, &sample.truth);
    let history = &scenes[..scenes.len() - 1];
    let tokens = default_task_tokens(&arch, sample.truth.dt, history.len(), scene.gravity);
    let radius = default_radius(&sample.scene);

    let est = estimate_uncertainty(&members, history, radius, &tokens, 8, 99).unwrap();
    for (i, total) in est.u_total.iter().enumerate() {
        println!(
            "coord {i}: u_perc {:.3e}  u_model {:.3e}  u_env {:.3e}  total {:.3e}",
            est.u_perc[i], est.u_model[i], est.u_env[i], total
        );
        assert!(*total >= 0.0);
    }
}
