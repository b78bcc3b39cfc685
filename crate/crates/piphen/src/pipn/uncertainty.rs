//! Three-way uncertainty split: MC-dropout variance, ensemble disagreement,
//! and the learned observation-noise head, summed per output dimension.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{pipn_forward, PipnModel};
use super::PipnError;
use crate::autodiff::Tape;
use crate::physics::WorldState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyEstimate {
    pub u_perc: Vec<f64>,
    pub u_model: Vec<f64>,
    pub u_env: Vec<f64>,
    pub u_total: Vec<f64>,
}

fn final_row(
    model: &PipnModel,
    scene_history: &[WorldState],
    radius: f64,
    task_tokens: &[Vec<f64>],
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<(Vec<f64>, Vec<f64>), PipnError> {
    let tape = Tape::new();
    let out = pipn_forward(&tape, model, scene_history, radius, task_tokens, None, dropout_rng)?;
    let mut states = Vec::new();
    let mut sigma = Vec::new();
    for (s, v) in &out.per_node {
        let t_last = tape.shape_of(*s)[0] - 1;
        states.extend(tape.value_of(tape.row(*s, t_last)?).data);
        sigma.extend(tape.value_of(tape.row(*v, t_last)?).data);
    }
    Ok((states, sigma))
}

/// Population variance, computed around the first sample so identical
/// samples give exact zeros.
fn variance(samples: &[Vec<f64>]) -> Vec<f64> {
    let n = samples.len() as f64;
    let dims = samples[0].len();
    let mut mean_d = vec![0.0; dims];
    let mut mean_d2 = vec![0.0; dims];
    for s in samples {
        for i in 0..dims {
            let d = s[i] - samples[0][i];
            mean_d[i] += d / n;
            mean_d2[i] += d * d / n;
        }
    }
    (0..dims).map(|i| (mean_d2[i] - mean_d[i] * mean_d[i]).max(0.0)).collect()
}

/// U_perc from `k` dropout-active passes of the first model, U_model across
/// the ensemble's deterministic predictions, U_env from the ensemble-mean
/// variance head; all over the final prediction row, flattened body-major.
pub fn estimate_uncertainty(
    models: &[PipnModel],
    scene_history: &[WorldState],
    radius: f64,
    task_tokens: &[Vec<f64>],
    k: usize,
    seed: u64,
) -> Result<UncertaintyEstimate, PipnError> {
    if models.is_empty() {
        return Err(PipnError::Invalid("uncertainty needs at least one model".into()));
    }
    if k < 2 {
        return Err(PipnError::Invalid(format!("MC sampling needs k >= 2, got {k}")));
    }
    let mut mc = Vec::with_capacity(k);
    for pass in 0..k {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (pass as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let (row, _) = final_row(&models[0], scene_history, radius, task_tokens, Some(&mut rng))?;
        mc.push(row);
    }
    let u_perc = variance(&mc);

    let mut ensemble = Vec::with_capacity(models.len());
    let mut sigma_sum = vec![0.0; u_perc.len()];
    for m in models {
        let (row, sigma) = final_row(m, scene_history, radius, task_tokens, None)?;
        for (acc, s) in sigma_sum.iter_mut().zip(&sigma) {
            *acc += s / models.len() as f64;
        }
        ensemble.push(row);
    }
    let u_model = variance(&ensemble);
    let u_env = sigma_sum;
    let u_total: Vec<f64> = u_perc
        .iter()
        .zip(&u_model)
        .zip(&u_env)
        .map(|((a, b), c)| a + b + c)
        .collect();
    Ok(UncertaintyEstimate { u_perc, u_model, u_env, u_total })
}
