//! Generate synthetic rollouts, reject the ones whose conservation checks
//! fail, and train a student predictor on the survivors. Every third scene
//! is deliberately corrupted with an energy jump to exercise the verifier.

use piphen::orchestrator::{generate_purify_deploy, inject_energy_jump, PipelineConfig};

fn main() {
    let cfg = PipelineConfig { n_scenes: 9, seed: 11, student_steps: 10, ..Default::default() };
    let jump = 10.0 * cfg.tol_e_rel;
    let outcome = generate_purify_deploy(&cfg, |i, traj| {
        if i % 3 == 0 {
            inject_energy_jump(traj, 9.81, jump);
        }
    })
    .unwrap();

    let r = &outcome.report;
    println!("generated {} scenes, kept {:?}", r.generated, r.accepted);
    for (i, reason) in &r.rejected {
        println!("scene {i} rejected: {reason:?}");
    }
    println!("student loss {:.4} -> {:.4}", r.student_first_loss, r.student_final_loss);
    assert_eq!(r.rejected.len(), 3, "the corrupted scenes and only those");
    assert!(outcome.student.trained);
}
