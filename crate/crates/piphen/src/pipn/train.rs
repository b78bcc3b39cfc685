//! Full-batch training of the prediction network against oracle rollouts.

use serde::{Deserialize, Serialize};

use super::loss::loss_total_tape;
use super::model::{default_task_tokens, init_pipn, pipn_forward, scenes_from_trajectory, PipnConfig, PipnModel};
use super::PipnError;
use crate::autodiff::{AdamW, OptimConfig, Tape};
use crate::physics::{oracle_future, Trajectory, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipnSample {
    pub scene: WorldState,
    pub truth: Trajectory,
}

/// Roll each scene forward with the oracle to produce labeled samples.
pub fn make_dataset(scenes: &[WorldState], horizon: usize, dt: f64) -> Result<Vec<PipnSample>, PipnError> {
    scenes
        .iter()
        .map(|s| Ok(PipnSample { scene: s.clone(), truth: oracle_future(s, horizon, dt)? }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipnTrainConfig {
    pub steps: usize,
    pub seed: u64,
    pub optim: OptimConfig,
    /// Interaction radius; None picks 4x the largest body radius per scene.
    pub radius: Option<f64>,
}

impl Default for PipnTrainConfig {
    fn default() -> Self {
        PipnTrainConfig { steps: 500, seed: 0, optim: OptimConfig::default(), radius: None }
    }
}

fn sample_radius(cfg: &PipnTrainConfig, scene: &WorldState) -> f64 {
    cfg.radius.unwrap_or_else(|| super::graph::default_radius(scene))
}

/// One full-batch loss over the dataset, built on the given tape.
pub fn dataset_loss(
    tape: &Tape,
    model: &PipnModel,
    dataset: &[PipnSample],
    cfg: &PipnTrainConfig,
) -> Result<crate::autodiff::Value, PipnError> {
    let mut total = tape.constant_scalar(0.0);
    for sample in dataset {
        let horizon = sample.truth.len() - 1;
        let scenes = scenes_from_trajectory(&sample.scene, &sample.truth);
        let history = &scenes[..horizon];
        let tokens = default_task_tokens(&model.config, sample.truth.dt, horizon, sample.scene.gravity);
        let out = pipn_forward(tape, model, history, sample_radius(cfg, &sample.scene), &tokens, None, None)?;
        let loss = loss_total_tape(tape, &model.config, &out, &sample.truth, sample.scene.gravity, sample.scene.time)?;
        total = tape.add(total, loss.total)?;
    }
    Ok(tape.scale(total, 1.0 / dataset.len() as f64))
}

/// Train from scratch; returns the model and the per-step loss curve.
pub fn train_pipn(
    dataset: &[PipnSample],
    arch: &PipnConfig,
    cfg: &PipnTrainConfig,
) -> Result<(PipnModel, Vec<f64>), PipnError> {
    if dataset.is_empty() {
        return Err(PipnError::Invalid("training needs a non-empty dataset".into()));
    }
    for s in dataset {
        if s.truth.len() < 2 {
            return Err(PipnError::Invalid("each sample needs >= 2 truth steps".into()));
        }
    }
    let mut model = init_pipn(arch, cfg.seed)?;
    let mut opt = AdamW::new(cfg.optim.clone());
    let mut curve = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let tape = Tape::new();
        let loss = dataset_loss(&tape, &model, dataset, cfg)?;
        curve.push(tape.item(loss));
        tape.backward(loss)?;
        tape.accumulate_param_grads(&mut model.params)?;
        opt.step(&mut model.params)?;
    }
    model.trained = true;
    Ok((model, curve))
}
