//! Generate-Purify-Deploy: seeded scenario generation, conservation-based
//! verification, and distillation of the kept corpus into a student model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::physics::{oracle_future, RigidBody, Trajectory, WorldState};
use crate::pipn::{train_pipn, PipnConfig, PipnModel, PipnSample, PipnTrainConfig};

use super::OrchestratorError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Raw corpus size N_scenes.
    pub n_scenes: usize,
    pub seed: u64,
    /// Trajectory length per scene.
    pub horizon: usize,
    pub dt: f64,
    /// Max relative energy jump between consecutive steps.
    pub tol_e_rel: f64,
    /// Max absolute momentum error across a collision.
    pub tol_m_abs: f64,
    pub student_steps: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n_scenes: 8,
            seed: 0,
            horizon: 10,
            dt: 0.05,
            tol_e_rel: 1e-4,
            tol_m_abs: 1e-6,
            student_steps: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RejectReason {
    Energy,
    Momentum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierOutcome {
    pub accepted: bool,
    pub reason: Option<RejectReason>,
}

/// Conservation checker: rejects trajectories whose step-to-step energy
/// jumps exceed `tol_e_rel` (relative to initial energy) or whose collision
/// events fail momentum bookkeeping beyond `tol_m_abs`.
pub fn verify_trajectory(
    traj: &Trajectory,
    gravity: f64,
    tol_e_rel: f64,
    tol_m_abs: f64,
) -> VerifierOutcome {
    let e0 = traj.energy_at(0, gravity).abs().max(1e-12);
    for t in 1..traj.len() {
        let jump = (traj.energy_at(t, gravity) - traj.energy_at(t - 1, gravity)).abs();
        if jump / e0 > tol_e_rel {
            return VerifierOutcome { accepted: false, reason: Some(RejectReason::Energy) };
        }
    }
    for ev in &traj.events {
        let mass = |id| {
            traj.body_ids
                .iter()
                .position(|&b| b == id)
                .map(|k| traj.masses[k])
                .unwrap_or(0.0)
        };
        let (mi, mj) = (mass(ev.body_i), mass(ev.body_j));
        for axis in 0..2 {
            let pre = mi * ev.v_i_pre[axis] + mj * ev.v_j_pre[axis];
            let post = mi * ev.v_i_post[axis] + mj * ev.v_j_post[axis];
            if (post - pre).abs() > tol_m_abs {
                return VerifierOutcome { accepted: false, reason: Some(RejectReason::Momentum) };
            }
        }
    }
    VerifierOutcome { accepted: true, reason: None }
}

/// Seeded randomized two-body scene, the default generator.
pub fn random_scene(seed: u64) -> Result<WorldState, OrchestratorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // bodies close enough to interact (and sometimes collide), never
    // overlapping at t=0
    let x0 = rng.gen_range(-4.0..4.0);
    let y0 = rng.gen_range(2.0..8.0);
    let gap = rng.gen_range(0.70..0.75);
    let mut bodies = Vec::new();
    for id in 1..=2u32 {
        bodies.push(RigidBody::new(
            id,
            rng.gen_range(0.5..3.0),
            [x0 + gap * (id - 1) as f64, y0],
            [rng.gen_range(-1.5..1.5), rng.gen_range(-0.5..0.5)],
            rng.gen_range(0.2..0.3),
        )?);
    }
    Ok(WorldState::new(bodies, 9.81))
}

/// Scale all velocities from the midpoint on so the energy baseline jumps by
/// `rel_jump` of the initial total energy. Used to exercise the verifier.
pub fn inject_energy_jump(traj: &mut Trajectory, gravity: f64, rel_jump: f64) {
    let e0 = traj.energy_at(0, gravity).abs().max(1e-12);
    let mid = traj.len() / 2;
    let ke_mid: f64 = traj.states[mid]
        .iter()
        .zip(&traj.masses)
        .map(|(r, m)| 0.5 * m * (r.velocity[0].powi(2) + r.velocity[1].powi(2)))
        .sum();
    let factor = (1.0 + rel_jump * e0 / ke_mid.max(1e-12)).max(0.0).sqrt();
    for t in mid..traj.len() {
        for rec in traj.states[t].iter_mut() {
            rec.velocity[0] *= factor;
            rec.velocity[1] *= factor;
        }
    }
}

/// Corrupt the first collision event's outgoing velocity by `amount`.
pub fn inject_momentum_error(traj: &mut Trajectory, amount: f64) -> bool {
    match traj.events.first_mut() {
        Some(ev) => {
            ev.v_i_post[0] += amount;
            true
        }
        None => false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub generated: usize,
    pub accepted: Vec<usize>,
    pub rejected: Vec<(usize, RejectReason)>,
    pub student_first_loss: f64,
    pub student_final_loss: f64,
}

#[derive(Debug)]
pub struct PipelineOutcome {
    pub student: PipnModel,
    pub report: PipelineReport,
}

/// Stage 1 generates `n_scenes` oracle trajectories, stage 2 keeps those
/// passing the verifier, stage 3 fits the student to the kept set.
pub fn generate_purify_deploy(
    config: &PipelineConfig,
    corrupt: impl Fn(usize, &mut Trajectory),
) -> Result<PipelineOutcome, OrchestratorError> {
    if config.n_scenes == 0 || config.horizon < 2 || config.dt <= 0.0 {
        return Err(OrchestratorError::Invalid("degenerate pipeline config".into()));
    }
    let mut samples = Vec::new();
    let mut report = PipelineReport {
        generated: config.n_scenes,
        accepted: Vec::new(),
        rejected: Vec::new(),
        student_first_loss: f64::NAN,
        student_final_loss: f64::NAN,
    };
    for i in 0..config.n_scenes {
        let scene = random_scene(config.seed.wrapping_add(i as u64))?;
        let mut truth = oracle_future(&scene, config.horizon, config.dt)?;
        corrupt(i, &mut truth);
        let outcome = verify_trajectory(&truth, scene.gravity, config.tol_e_rel, config.tol_m_abs);
        if outcome.accepted {
            report.accepted.push(i);
            samples.push(PipnSample { scene, truth });
        } else {
            report.rejected.push((i, outcome.reason.expect("rejections carry a reason")));
        }
    }
    if samples.is_empty() {
        return Err(OrchestratorError::Invalid(format!(
            "pipeline aborted: all {} generated scenes were rejected",
            config.n_scenes
        )));
    }
    let arch = PipnConfig { dropout: 0.0, ..PipnConfig::small() };
    let train = PipnTrainConfig { steps: config.student_steps, seed: config.seed, ..Default::default() };
    let (student, curve) = train_pipn(&samples, &arch, &train)?;
    report.student_first_loss = curve.first().copied().unwrap_or(f64::NAN);
    report.student_final_loss = curve.last().copied().unwrap_or(f64::NAN);
    Ok(PipelineOutcome { student, report })
}
