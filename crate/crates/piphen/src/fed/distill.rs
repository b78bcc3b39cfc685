//! Federated distillation rounds: distribute weights, train locally, exchange
//! soft labels on a shared proxy set, aggregate, update the global teacher
//! with a KL objective.

use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamW, OptimConfig, Params, Tape, Tensor, Value};

use super::model::{
    batch_value, cross_entropy_tape, logits, logits_tape, soft_label_bytes, weight_bytes,
    FdDataset, FdModelConfig,
};
use super::FedError;

/// Protocol knobs. `server_steps` is the per-round global-teacher update
/// budget; everything else follows the standard recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdConfig {
    pub local_epochs: usize,
    pub rounds: usize,
    pub lr: f64,
    pub temperature: f64,
    pub proxy_size: usize,
    pub server_steps: usize,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            local_epochs: 5,
            rounds: 50,
            lr: 1e-4,
            temperature: 2.0,
            proxy_size: 1000,
            server_steps: 50,
        }
    }
}

impl FdConfig {
    pub fn validate(&self) -> Result<(), FedError> {
        if self.local_epochs < 1 || self.rounds < 1 {
            return Err(FedError::Invalid(
                "local_epochs and rounds must both be >= 1".into(),
            ));
        }
        if !(self.temperature > 0.0) {
            return Err(FedError::Invalid(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.proxy_size == 0 {
            return Err(FedError::Invalid("proxy set must be nonempty".into()));
        }
        Ok(())
    }

    fn optim(&self) -> OptimConfig {
        OptimConfig { lr: self.lr, weight_decay: 0.0, ..OptimConfig::default() }
    }
}

/// One participant. `failed` marks a client that dropped out of the current
/// round; its labels are excluded and it receives no update traffic.
#[derive(Debug, Clone)]
pub struct FdClient {
    pub id: u32,
    pub data: FdDataset,
    pub params: Params,
    pub failed: bool,
}

/// Per-round log record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdRoundRecord {
    pub round: usize,
    /// (client id, final local cross-entropy) for each participating client.
    pub local_losses: Vec<(u32, f64)>,
    /// KL(ensemble || global) on the proxy set after the server update.
    pub kd_loss: f64,
    pub bytes_down: u64,
    pub bytes_up: u64,
}

/// Elementwise mean of congruent soft-label sets.
pub fn aggregate(sets: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<f64>>, FedError> {
    let first = sets.first().ok_or_else(|| FedError::Invalid("no label sets".into()))?;
    for set in sets {
        if set.len() != first.len()
            || set.iter().zip(first).any(|(a, b)| a.len() != b.len())
        {
            return Err(FedError::Invalid("soft-label shape mismatch".into()));
        }
    }
    let scale = 1.0 / sets.len() as f64;
    let mut out = vec![vec![0.0; first.first().map_or(0, Vec::len)]; first.len()];
    for set in sets {
        for (acc, z) in out.iter_mut().zip(set) {
            for (a, &v) in acc.iter_mut().zip(z) {
                *a += v * scale;
            }
        }
    }
    Ok(out)
}

fn softened(z: &[f64], tau: f64) -> Vec<f64> {
    let max = z.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v / tau));
    let exps: Vec<f64> = z.iter().map(|&v| (v / tau - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// KL(softmax(z_teacher/tau) || softmax(z_student/tau)), summed over classes,
/// mean over samples.
pub fn kd_loss(
    z_teacher: &[Vec<f64>],
    z_student: &[Vec<f64>],
    tau: f64,
) -> Result<f64, FedError> {
    if !(tau > 0.0) {
        return Err(FedError::Invalid(format!("temperature must be positive, got {tau}")));
    }
    if z_teacher.is_empty() || z_teacher.len() != z_student.len() {
        return Err(FedError::Invalid("teacher/student sample counts differ".into()));
    }
    let mut total = 0.0;
    for (zt, zs) in z_teacher.iter().zip(z_student) {
        if zt.len() != zs.len() {
            return Err(FedError::Invalid("teacher/student class counts differ".into()));
        }
        let p = softened(zt, tau);
        let q = softened(zs, tau);
        total += p
            .iter()
            .zip(&q)
            .filter(|(&pi, _)| pi > 0.0)
            .map(|(&pi, &qi)| pi * (pi.ln() - qi.ln()))
            .sum::<f64>();
    }
    Ok(total / z_teacher.len() as f64)
}

/// On-tape KD objective against fixed teacher logits. Only the cross-entropy
/// part of the KL depends on the student, so the teacher entropy enters as a
/// constant and gradients match the plain [`kd_loss`].
fn kd_loss_tape(
    tape: &Tape,
    z_teacher: &[Vec<f64>],
    student_logits: Value,
    tau: f64,
) -> Result<Value, FedError> {
    let n = z_teacher.len();
    let c = z_teacher[0].len();
    let mut probs = Vec::with_capacity(n * c);
    let mut teacher_entropy = 0.0;
    for zt in z_teacher {
        let p = softened(zt, tau);
        teacher_entropy += p.iter().filter(|&&pi| pi > 0.0).map(|&pi| pi * pi.ln()).sum::<f64>();
        probs.extend(p);
    }
    let p = tape.constant(Tensor::matrix(n, c, probs)?);
    let log_q = tape.log_softmax(tape.scale(student_logits, 1.0 / tau))?;
    let cross = tape.scale(tape.sum(tape.mul(p, log_q)?), -1.0 / n as f64);
    Ok(tape.add_scalar(cross, teacher_entropy / n as f64))
}

/// One full-batch gradient step count `epochs` of local cross-entropy
/// training; returns the final loss.
fn local_train(
    client: &mut FdClient,
    model_cfg: &FdModelConfig,
    fd_cfg: &FdConfig,
) -> Result<f64, FedError> {
    let mut optim = AdamW::new(fd_cfg.optim());
    let mut last = f64::NAN;
    for _ in 0..fd_cfg.local_epochs {
        let tape = Tape::new();
        let batch = batch_value(&tape, model_cfg, &client.data.inputs)?;
        let out = logits_tape(&tape, &client.params, model_cfg, batch)?;
        let loss =
            cross_entropy_tape(&tape, out, &client.data.labels, model_cfg.n_classes)?;
        last = tape.item(loss);
        tape.backward(loss)?;
        client.params.zero_grad();
        tape.accumulate_param_grads(&mut client.params)?;
        optim.step(&mut client.params)?;
    }
    Ok(last)
}

/// One protocol round. Mutates the server weights and the participating
/// clients' weights in place.
pub fn fd_round(
    round: usize,
    server: &mut Params,
    clients: &mut [FdClient],
    proxy: &[Vec<f64>],
    model_cfg: &FdModelConfig,
    fd_cfg: &FdConfig,
) -> Result<FdRoundRecord, FedError> {
    fd_cfg.validate()?;
    model_cfg.validate()?;
    if clients.is_empty() {
        return Err(FedError::Invalid("at least one client required".into()));
    }
    if proxy.is_empty() {
        return Err(FedError::Invalid("proxy set must be nonempty".into()));
    }

    let w_bytes = weight_bytes(server);
    let label_bytes = soft_label_bytes(proxy.len(), model_cfg.n_classes);
    // Soft-label exchange must be cheaper than shipping weights; otherwise
    // the configured model defeats the purpose of the protocol.
    if label_bytes >= w_bytes {
        return Err(FedError::ByteBudget { label_bytes, weight_bytes: w_bytes });
    }

    let mut local_losses = Vec::new();
    let mut label_sets = Vec::new();
    let mut bytes_down = 0;
    let mut bytes_up = 0;
    for client in clients.iter_mut() {
        if client.failed {
            continue;
        }
        client.params = server.clone();
        bytes_down += w_bytes;
        let loss = local_train(client, model_cfg, fd_cfg)?;
        local_losses.push((client.id, loss));
        label_sets.push(logits(&client.params, model_cfg, proxy)?);
        bytes_up += label_bytes;
    }
    if label_sets.is_empty() {
        return Err(FedError::Invalid("every client failed this round".into()));
    }
    let z_ensemble = aggregate(&label_sets)?;

    let mut optim = AdamW::new(fd_cfg.optim());
    for _ in 0..fd_cfg.server_steps {
        let tape = Tape::new();
        let batch = batch_value(&tape, model_cfg, proxy)?;
        let out = logits_tape(&tape, server, model_cfg, batch)?;
        let loss = kd_loss_tape(&tape, &z_ensemble, out, fd_cfg.temperature)?;
        tape.backward(loss)?;
        server.zero_grad();
        tape.accumulate_param_grads(server)?;
        optim.step(server)?;
    }

    let z_global = logits(server, model_cfg, proxy)?;
    Ok(FdRoundRecord {
        round,
        local_losses,
        kd_loss: kd_loss(&z_ensemble, &z_global, fd_cfg.temperature)?,
        bytes_down,
        bytes_up,
    })
}

/// Run the full federation schedule and return one record per round.
pub fn run_federation(
    server: &mut Params,
    clients: &mut [FdClient],
    proxy: &[Vec<f64>],
    model_cfg: &FdModelConfig,
    fd_cfg: &FdConfig,
) -> Result<Vec<FdRoundRecord>, FedError> {
    fd_cfg.validate()?;
    (1..=fd_cfg.rounds)
        .map(|r| fd_round(r, server, clients, proxy, model_cfg, fd_cfg))
        .collect()
}
