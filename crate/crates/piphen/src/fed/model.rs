//! Toy classifier and synthetic data used by the federated distillation loop.
//!
//! The federation protocol is model-agnostic; this MLP exists so the round
//! mechanics (soft labels, aggregation, KD updates, byte accounting) can be
//! exercised end to end on a task small enough for tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{init, Params, Tape, Tensor, Value};

use super::FedError;

/// Architecture of the shared classifier. Every client and the server use
/// the same shape; only weights differ.
#[derive(Debug, Clone, PartialEq)]
pub struct FdModelConfig {
    pub d_in: usize,
    pub hidden: Vec<usize>,
    pub n_classes: usize,
}

impl Default for FdModelConfig {
    fn default() -> Self {
        // Sized so that one client's weights outweigh one round of soft
        // labels on the default 1000-sample proxy set.
        FdModelConfig { d_in: 8, hidden: vec![128, 128], n_classes: 4 }
    }
}

impl FdModelConfig {
    /// Small variant for fast tests.
    pub fn small() -> Self {
        FdModelConfig { d_in: 4, hidden: vec![16], n_classes: 3 }
    }

    pub fn validate(&self) -> Result<(), FedError> {
        if self.d_in == 0 || self.n_classes < 2 || self.hidden.iter().any(|&h| h == 0) {
            return Err(FedError::Invalid(format!("bad model config {self:?}")));
        }
        Ok(())
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.d_in;
        for &h in &self.hidden {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.n_classes));
        dims
    }
}

pub fn init_fd_model(config: &FdModelConfig, seed: u64) -> Result<Params, FedError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Params::new();
    for (l, (rows, cols)) in config.layer_dims().into_iter().enumerate() {
        params.insert(format!("fd.w{l}"), init::glorot(&mut rng, rows, cols));
        params.insert(format!("fd.b{l}"), init::zeros_vec(cols));
    }
    Ok(params)
}

/// Forward pass for a batch `[n, d_in] -> [n, n_classes]`. Mish hidden
/// activations, linear head (logits).
pub fn logits_tape(
    tape: &Tape,
    params: &Params,
    config: &FdModelConfig,
    batch: Value,
) -> Result<Value, FedError> {
    let n_layers = config.hidden.len() + 1;
    let mut x = batch;
    for l in 0..n_layers {
        let w = tape.param(params, &format!("fd.w{l}"))?;
        let b = tape.param(params, &format!("fd.b{l}"))?;
        x = tape.add_bias(tape.matmul(x, w)?, b)?;
        if l + 1 < n_layers {
            x = tape.mish(x);
        }
    }
    Ok(x)
}

/// Plain forward pass; the tape is private to the call.
pub fn logits(
    params: &Params,
    config: &FdModelConfig,
    inputs: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, FedError> {
    if inputs.is_empty() {
        return Err(FedError::Invalid("empty input batch".into()));
    }
    let tape = Tape::new();
    let batch = batch_value(&tape, config, inputs)?;
    let out = logits_tape(&tape, params, config, batch)?;
    let t = tape.value_of(out);
    Ok(t.data.chunks(config.n_classes).map(|row| row.to_vec()).collect())
}

pub fn batch_value(
    tape: &Tape,
    config: &FdModelConfig,
    inputs: &[Vec<f64>],
) -> Result<Value, FedError> {
    let n = inputs.len();
    let mut flat = Vec::with_capacity(n * config.d_in);
    for row in inputs {
        if row.len() != config.d_in {
            return Err(FedError::Invalid(format!(
                "input width {} != d_in {}",
                row.len(),
                config.d_in
            )));
        }
        flat.extend_from_slice(row);
    }
    Ok(tape.constant(Tensor::matrix(n, config.d_in, flat)?))
}

/// Mean negative log-likelihood of `labels` under `logits` (`[n, c]`).
pub fn cross_entropy_tape(
    tape: &Tape,
    logits: Value,
    labels: &[usize],
    n_classes: usize,
) -> Result<Value, FedError> {
    let n = labels.len();
    let shape = tape.shape_of(logits);
    if shape != [n, n_classes] {
        return Err(FedError::Invalid(format!(
            "logits shape {shape:?} does not match {n} labels x {n_classes} classes"
        )));
    }
    let mut mask = vec![0.0; n * n_classes];
    for (i, &label) in labels.iter().enumerate() {
        if label >= n_classes {
            return Err(FedError::Invalid(format!("label {label} >= {n_classes}")));
        }
        mask[i * n_classes + label] = 1.0;
    }
    let mask = tape.constant(Tensor::matrix(n, n_classes, mask)?);
    let picked = tape.mul(tape.log_softmax(logits)?, mask)?;
    Ok(tape.scale(tape.sum(picked), -1.0 / n as f64))
}

/// Labeled private dataset for one client.
#[derive(Debug, Clone, PartialEq)]
pub struct FdDataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

/// Separable class blobs: class c's center puts mass 3.0 on coordinate
/// c mod d_in, samples add uniform noise in (-0.8, 0.8).
pub fn make_blobs(config: &FdModelConfig, n: usize, seed: u64) -> FdDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let label = rng.gen_range(0..config.n_classes);
        let mut x = vec![0.0; config.d_in];
        x[label % config.d_in] = 3.0;
        for v in x.iter_mut() {
            *v += rng.gen_range(-0.8..0.8);
        }
        inputs.push(x);
        labels.push(label);
    }
    FdDataset { inputs, labels }
}

/// Unlabeled proxy inputs shared by all participants. Callers must use a
/// seed disjoint from every private dataset seed.
pub fn proxy_inputs(config: &FdModelConfig, n: usize, seed: u64) -> Vec<Vec<f64>> {
    make_blobs(config, n, seed).inputs
}

/// Serialized size of a full weight set, as charged to the downlink.
pub fn weight_bytes(params: &Params) -> u64 {
    (params.numel() * std::mem::size_of::<f64>()) as u64
}

/// Serialized size of one client's soft labels for a given proxy set.
pub fn soft_label_bytes(proxy_len: usize, n_classes: usize) -> u64 {
    (proxy_len * n_classes * std::mem::size_of::<f64>()) as u64
}
