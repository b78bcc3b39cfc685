//! Behavior cloning with the energy-drift penalty. The penalty is the
//! squared central difference of the learned Hamiltonian along the flow the
//! policy's own action induces, built on tape so both networks receive
//! gradients without second-order machinery.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::expert::{expert_rollout, phase_rep, ExpertConfig};
use super::model::{hamiltonian_tape, init_hen, policy_tape, HenConfig, HenModel, PhaseState};
use super::HenError;
use crate::autodiff::{AdamW, OptimConfig, Tape};
use crate::physics::{BodyId, WorldState};

pub const DEMO_VERSION: u32 = 1;

/// One behavior-cloning record: network input, expert action, and the phase
/// state with its oracle derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HenDemoStep {
    pub rep: Vec<f64>,
    pub u_expert: Vec<f64>,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub qdot: Vec<f64>,
    pub pdot: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DemoFile {
    version: u32,
    steps: Vec<HenDemoStep>,
}

pub fn save_demos(path: &Path, steps: &[HenDemoStep]) -> Result<(), HenError> {
    let f = DemoFile { version: DEMO_VERSION, steps: steps.to_vec() };
    let text = serde_json::to_string(&f).map_err(|e| HenError::Invalid(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_demos(path: &Path) -> Result<Vec<HenDemoStep>, HenError> {
    let text = fs::read_to_string(path)?;
    let f: DemoFile = serde_json::from_str(&text).map_err(|e| HenError::Invalid(e.to_string()))?;
    if f.version != DEMO_VERSION {
        return Err(HenError::Invalid(format!("unsupported demo version {}", f.version)));
    }
    Ok(f.steps)
}

/// Expert rollout converted into demo records. Failed rollouts (goal never
/// reached) are excluded by returning an empty set.
pub fn collect_demos(
    world: &WorldState,
    body: BodyId,
    goal: [f64; 2],
    expert_cfg: &ExpertConfig,
    d_rep: usize,
    max_steps: usize,
) -> Result<Vec<HenDemoStep>, HenError> {
    let rollout = expert_rollout(world, body, goal, expert_cfg, max_steps)?;
    if !rollout.reached {
        return Ok(Vec::new());
    }
    let mut steps = Vec::new();
    for (w, act) in &rollout.steps {
        let b = w.body(body).unwrap();
        let state = PhaseState::new(
            b.position.to_vec(),
            vec![b.mass * b.velocity[0], b.mass * b.velocity[1]],
        )?;
        steps.push(HenDemoStep {
            rep: phase_rep(&state, goal, d_rep)?,
            u_expert: act.u.to_vec(),
            q: state.q.clone(),
            p: state.p.clone(),
            qdot: act.qdot.to_vec(),
            pdot: act.pdot.to_vec(),
        });
    }
    Ok(steps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HenTrainConfig {
    pub steps: usize,
    pub seed: u64,
    pub optim: OptimConfig,
    /// Diagonal mass matrix entries, one per phase coordinate.
    pub masses: Vec<f64>,
    /// Velocity servo time constant of the differentiable plant model.
    pub servo_tau: f64,
    /// Central-difference step for the on-tape energy-drift estimate.
    pub delta: f64,
}

impl Default for HenTrainConfig {
    fn default() -> Self {
        HenTrainConfig {
            steps: 200,
            seed: 0,
            optim: OptimConfig::default(),
            masses: vec![1.0, 1.0],
            servo_tau: 0.25,
            delta: 1e-3,
        }
    }
}

pub struct HenTrainReport {
    pub model: HenModel,
    /// Mean cloning loss per step.
    pub clone_curve: Vec<f64>,
    /// Mean |dH/dt| estimate per step.
    pub dhdt_curve: Vec<f64>,
}

pub fn train_hen(
    demos: &[HenDemoStep],
    arch: &HenConfig,
    cfg: &HenTrainConfig,
) -> Result<HenTrainReport, HenError> {
    if demos.is_empty() {
        return Err(HenError::Invalid("training needs at least one demo step".into()));
    }
    if arch.d_u != arch.phase_dim {
        return Err(HenError::Invalid("velocity control requires d_u == phase_dim".into()));
    }
    if cfg.masses.len() != arch.phase_dim || cfg.masses.iter().any(|&m| m <= 0.0) {
        return Err(HenError::Invalid("mass matrix must be positive with one entry per coordinate".into()));
    }
    for d in demos {
        if d.rep.len() != arch.d_rep || d.u_expert.len() != arch.d_u || d.q.len() != arch.phase_dim {
            return Err(HenError::Invalid("demo record dimensions disagree with the architecture".into()));
        }
    }
    let mut model = init_hen(arch, cfg.seed)?;
    let mut opt = AdamW::new(cfg.optim.clone());
    let mut clone_curve = Vec::with_capacity(cfg.steps);
    let mut dhdt_curve = Vec::with_capacity(cfg.steps);
    let inv_m: Vec<f64> = cfg.masses.iter().map(|m| 1.0 / m).collect();
    let m_over_tau: Vec<f64> = cfg.masses.iter().map(|m| m / cfg.servo_tau).collect();

    for _ in 0..cfg.steps {
        let tape = Tape::new();
        let mut clone_acc = 0.0;
        let mut dhdt_acc = 0.0;
        let mut total = tape.constant_scalar(0.0);
        for d in demos {
            let rep = tape.constant_vector(d.rep.clone());
            let u = policy_tape(&tape, &model.params, arch, rep)?;
            let ue = tape.constant_vector(d.u_expert.clone());
            let task = tape.sum_squares(tape.sub(u, ue)?)?;
            clone_acc += tape.item(task) / demos.len() as f64;

            // flow induced by the policy's own command under the velocity
            // servo plant: qdot = p/m, pdot = (u - qdot) * m / tau
            let p0 = tape.constant_vector(d.p.clone());
            let q0 = tape.constant_vector(d.q.clone());
            let qdot = tape.mul(p0, tape.constant_vector(inv_m.clone()))?;
            let pdot = tape.mul(tape.sub(u, qdot)?, tape.constant_vector(m_over_tau.clone()))?;
            let x_plus = tape.concat(&[
                tape.add(q0, tape.scale(qdot, cfg.delta))?,
                tape.add(p0, tape.scale(pdot, cfg.delta))?,
            ])?;
            let x_minus = tape.concat(&[
                tape.sub(q0, tape.scale(qdot, cfg.delta))?,
                tape.sub(p0, tape.scale(pdot, cfg.delta))?,
            ])?;
            let h_plus = hamiltonian_tape(&tape, &model.params, arch, x_plus)?;
            let h_minus = hamiltonian_tape(&tape, &model.params, arch, x_minus)?;
            let dhdt = tape.scale(tape.sub(h_plus, h_minus)?, 1.0 / (2.0 * cfg.delta));
            dhdt_acc += tape.item(dhdt).abs() / demos.len() as f64;
            let penalty = tape.scale(tape.mul(dhdt, dhdt)?, arch.lambda);
            total = tape.add(total, tape.add(task, penalty)?)?;
        }
        total = tape.scale(total, 1.0 / demos.len() as f64);
        clone_curve.push(clone_acc);
        dhdt_curve.push(dhdt_acc);
        tape.backward(total)?;
        tape.accumulate_param_grads(&mut model.params)?;
        opt.step(&mut model.params)?;
    }
    model.trained = true;
    Ok(HenTrainReport { model, clone_curve, dhdt_curve })
}

/// Mean |dH/dt| of a trained model along held-out demo records under their
/// recorded oracle derivatives.
pub fn mean_abs_dhdt(model: &HenModel, demos: &[HenDemoStep]) -> Result<f64, HenError> {
    if demos.is_empty() {
        return Err(HenError::Invalid("no records".into()));
    }
    let mut acc = 0.0;
    for d in demos {
        let x = PhaseState::new(d.q.clone(), d.p.clone())?;
        acc += super::model::dh_dt(model, &x, &d.qdot, &d.pdot)?.abs();
    }
    Ok(acc / demos.len() as f64)
}
