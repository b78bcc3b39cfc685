use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tensor::Params;
use super::AutodiffError;

/// AdamW settings. Defaults follow the training recipe used throughout the
/// crate: lr 1e-4, decoupled weight decay 2e-4, batch size 128.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            lr: 1e-4,
            weight_decay: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 128,
        }
    }
}

/// Adam with decoupled weight decay. Moment buffers are keyed by parameter
/// name so the same optimizer can survive checkpoint round trips.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub config: OptimConfig,
    moments: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
    step_count: u64,
}

impl AdamW {
    pub fn new(config: OptimConfig) -> Self {
        AdamW { config, moments: BTreeMap::new(), step_count: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update over every parameter in the store. Every parameter must
    /// carry a populated gradient; grads are consumed (cleared) by the step.
    pub fn step(&mut self, params: &mut Params) -> Result<(), AutodiffError> {
        for (name, t) in params.iter() {
            if t.grad.is_none() {
                return Err(AutodiffError::MissingGrad(name.clone()));
            }
        }
        self.step_count += 1;
        let t_step = self.step_count as i32;
        let c = &self.config;
        let bc1 = 1.0 - c.beta1.powi(t_step);
        let bc2 = 1.0 - c.beta2.powi(t_step);
        for (name, tensor) in params.iter_mut() {
            let grad = tensor.grad.take().expect("checked above");
            let (m, v) = self
                .moments
                .entry(name.clone())
                .or_insert_with(|| (vec![0.0; grad.len()], vec![0.0; grad.len()]));
            for i in 0..grad.len() {
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                // decoupled decay: applied to the weight, not the gradient
                tensor.data[i] -= c.lr * (m_hat / (v_hat.sqrt() + c.eps))
                    + c.lr * c.weight_decay * tensor.data[i];
            }
        }
        Ok(())
    }
}
