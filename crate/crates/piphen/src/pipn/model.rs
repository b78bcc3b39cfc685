//! The prediction network: graph attention layers over the scene graph, a
//! small self-attention task encoder, cross-attention fusion into one hybrid
//! vector, and a dilated causal temporal stack with state and variance heads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{build_graph, PhysicsGraph, EDGE_FEATURE_WIDTH};
use super::PipnError;
use crate::autodiff::{init, Params, Tape, Tensor, Value};
use crate::physics::{BodyRecord, Trajectory, WorldState};

/// Output width of the per-node state head: (px, py, q, vx, vy).
pub const STATE_WIDTH: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipnConfig {
    /// Node representation width; also the temporal stack's channel count.
    pub d_h: usize,
    /// Fused hybrid representation width.
    pub d_rep: usize,
    pub gcn_layers: usize,
    pub tcn_blocks: usize,
    pub kernel: usize,
    /// Width of one task token fed to the task encoder.
    pub task_token_width: usize,
    pub dropout: f64,
    pub sigma_floor: f64,
    pub lambda_phy: f64,
    pub w_e: f64,
    pub w_m: f64,
    /// Hard-mask steps before the latest contact event in the two
    /// largest-dilation temporal blocks.
    pub dynamic_mask: bool,
}

impl Default for PipnConfig {
    fn default() -> Self {
        PipnConfig {
            d_h: 256,
            d_rep: 768,
            gcn_layers: 4,
            tcn_blocks: 8,
            kernel: 3,
            task_token_width: 8,
            dropout: 0.1,
            sigma_floor: 1e-8,
            lambda_phy: 0.1,
            w_e: 1.0,
            w_m: 1.0,
            dynamic_mask: false,
        }
    }
}

impl PipnConfig {
    /// Shrunken copy for tests and demos; same topology, small widths.
    pub fn small() -> Self {
        PipnConfig { d_h: 12, d_rep: 16, ..PipnConfig::default() }
    }

    pub fn dilations(&self) -> Vec<usize> {
        (0..self.tcn_blocks).map(|k| 1usize << k).collect()
    }

    /// 1 + sum over blocks of 2 convs * (kernel - 1) * dilation.
    pub fn receptive_field(&self) -> usize {
        1 + self.dilations().iter().map(|d| 2 * (self.kernel - 1) * d).sum::<usize>()
    }

    pub fn validate(&self) -> Result<(), PipnError> {
        if self.d_h < super::graph::NODE_FEATURE_WIDTH {
            return Err(PipnError::Invalid(format!("d_h {} too small for raw node features", self.d_h)));
        }
        if self.kernel < 2 || self.gcn_layers == 0 || self.tcn_blocks == 0 || self.d_rep == 0 {
            return Err(PipnError::Invalid("degenerate architecture".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(PipnError::Invalid(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PipnModel {
    pub config: PipnConfig,
    pub params: Params,
    pub trained: bool,
}

pub fn init_pipn(config: &PipnConfig, seed: u64) -> Result<PipnModel, PipnError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Params::new();
    let d = config.d_h;
    for l in 0..config.gcn_layers {
        p.insert(format!("gcn{l}.w1"), init::glorot(&mut rng, d, d));
        p.insert(format!("gcn{l}.w2"), init::glorot(&mut rng, d, d));
        p.insert(format!("gcn{l}.wq"), init::glorot(&mut rng, d, d));
        p.insert(format!("gcn{l}.wk"), init::glorot(&mut rng, d, d));
        p.insert(format!("gcn{l}.we"), init::glorot(&mut rng, 1, EDGE_FEATURE_WIDTH));
    }
    p.insert("task.embed", init::glorot(&mut rng, config.task_token_width, d));
    for w in ["task.wq", "task.wk", "task.wv", "fuse.wq", "fuse.wk", "fuse.wv"] {
        p.insert(w, init::glorot(&mut rng, d, d));
    }
    p.insert("fuse.proj", init::glorot(&mut rng, d, config.d_rep));
    for b in 0..config.tcn_blocks {
        p.insert(format!("tcn{b}.conv1"), init::conv_kernel(&mut rng, d, d, config.kernel));
        p.insert(format!("tcn{b}.conv2"), init::conv_kernel(&mut rng, d, d, config.kernel));
        p.insert(format!("tcn{b}.bias1"), init::zeros_vec(d));
        p.insert(format!("tcn{b}.bias2"), init::zeros_vec(d));
    }
    p.insert("head.state", init::glorot(&mut rng, d, STATE_WIDTH));
    p.insert("head.state_bias", init::zeros_vec(STATE_WIDTH));
    p.insert("head.sigma", init::glorot(&mut rng, d, STATE_WIDTH));
    p.insert("head.sigma_bias", init::zeros_vec(STATE_WIDTH));
    Ok(PipnModel { config: config.clone(), params: p, trained: false })
}

/// Attention weights over one node's neighborhood:
/// softmax_j of (W_Q h_i)·(W_K h_j)/sqrt(d_k) + w_E·e_ij.
pub fn relational_attention(
    h_i: &[f64],
    h_js: &[Vec<f64>],
    e_ijs: &[[f64; EDGE_FEATURE_WIDTH]],
    params: &Params,
    layer: usize,
) -> Result<Vec<f64>, PipnError> {
    if h_js.is_empty() {
        return Ok(Vec::new());
    }
    if h_js.len() != e_ijs.len() {
        return Err(PipnError::Invalid("one edge feature row per neighbor required".into()));
    }
    let tape = Tape::new();
    let hi = tape.constant_vector(h_i.to_vec());
    let neigh: Vec<Value> = h_js.iter().map(|h| tape.constant_vector(h.clone())).collect();
    let feats: Vec<[f64; EDGE_FEATURE_WIDTH]> = e_ijs.to_vec();
    let alpha = attention_weights(&tape, params, layer, hi, &neigh, &feats)?;
    Ok(tape.value_of(alpha).data)
}

fn attention_weights(
    tape: &Tape,
    params: &Params,
    layer: usize,
    h_i: Value,
    h_js: &[Value],
    e_ijs: &[[f64; EDGE_FEATURE_WIDTH]],
) -> Result<Value, PipnError> {
    let wq = tape.param(params, &format!("gcn{layer}.wq"))?;
    let wk = tape.param(params, &format!("gcn{layer}.wk"))?;
    let we = tape.param(params, &format!("gcn{layer}.we"))?;
    let d_k = tape.shape_of(wq)[1] as f64;
    let q = tape.matmul(h_i, wq)?;
    let mut logits = Vec::with_capacity(h_js.len());
    for (hj, e) in h_js.iter().zip(e_ijs) {
        let kj = tape.matmul(*hj, wk)?;
        let content = tape.scale(tape.dot(q, kj)?, 1.0 / d_k.sqrt());
        let ev = tape.constant_vector(e.to_vec());
        let edge_term = tape.dot(tape.row(we, 0)?, ev)?;
        logits.push(tape.add(content, edge_term)?);
    }
    let stacked = tape.concat(&logits)?;
    Ok(tape.softmax(stacked)?)
}

/// L rounds of h_i <- ReLU(W1 h_i + sum_j alpha_ij W2 h_j). Returns the
/// [n, d_h] node representation matrix (empty graph gives a [0, d_h] stack
/// placeholder of None).
pub fn physgcn_forward(
    tape: &Tape,
    params: &Params,
    config: &PipnConfig,
    graph: &PhysicsGraph,
) -> Result<Option<Value>, PipnError> {
    let n = graph.node_count();
    if n == 0 {
        return Ok(None);
    }
    let mut rows: Vec<Value> = graph.nodes.iter().map(|f| tape.constant_vector(f.clone())).collect();
    for l in 0..config.gcn_layers {
        let w1 = tape.param(params, &format!("gcn{l}.w1"))?;
        let w2 = tape.param(params, &format!("gcn{l}.w2"))?;
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let self_term = tape.matmul(rows[i], w1)?;
            let combined = if graph.neighbors[i].is_empty() {
                self_term
            } else {
                let neigh: Vec<Value> = graph.neighbors[i].iter().map(|&j| rows[j]).collect();
                let alpha = attention_weights(tape, params, l, rows[i], &neigh, &graph.edge_feats[i])?;
                let msgs: Vec<Value> =
                    neigh.iter().map(|&hj| tape.matmul(hj, w2)).collect::<Result<_, _>>()?;
                let stacked = tape.stack_rows(&msgs)?;
                let agg = tape.matmul(alpha, stacked)?;
                tape.add(self_term, agg)?
            };
            next.push(tape.relu(combined));
        }
        rows = next;
    }
    Ok(Some(tape.stack_rows(&rows)?))
}

/// Single-block self-attention over task tokens, mean-pooled to one d_h
/// vector.
pub fn encode_task(
    tape: &Tape,
    params: &Params,
    config: &PipnConfig,
    tokens: &[Vec<f64>],
) -> Result<Value, PipnError> {
    if tokens.is_empty() || tokens.iter().any(|t| t.len() != config.task_token_width) {
        return Err(PipnError::Invalid(format!(
            "task tokens must be non-empty rows of width {}",
            config.task_token_width
        )));
    }
    let m = tokens.len();
    let flat: Vec<f64> = tokens.iter().flatten().copied().collect();
    let x = tape.constant(Tensor::matrix(m, config.task_token_width, flat).map_err(PipnError::from)?);
    let e = tape.matmul(x, tape.param(params, "task.embed")?)?;
    let q = tape.matmul(e, tape.param(params, "task.wq")?)?;
    let k = tape.matmul(e, tape.param(params, "task.wk")?)?;
    let v = tape.matmul(e, tape.param(params, "task.wv")?)?;
    let logits = tape.scale(tape.matmul(q, tape.transpose(k)?)?, 1.0 / (config.d_h as f64).sqrt());
    let attn = tape.softmax(logits)?;
    let ctx = tape.matmul(attn, v)?;
    let pool = tape.constant_vector(vec![1.0 / m as f64; m]);
    Ok(tape.matmul(pool, ctx)?)
}

/// Cross-attention with the task vector as Query over node representations,
/// projected to d_rep. An empty graph projects the task vector alone.
pub fn fuse(
    tape: &Tape,
    params: &Params,
    config: &PipnConfig,
    task_vector: Value,
    node_reps: Option<Value>,
) -> Result<Value, PipnError> {
    let proj = tape.param(params, "fuse.proj")?;
    let fused = match node_reps {
        None => tape.matmul(task_vector, proj)?,
        Some(r) => {
            let q = tape.matmul(task_vector, tape.param(params, "fuse.wq")?)?;
            let k = tape.matmul(r, tape.param(params, "fuse.wk")?)?;
            let v = tape.matmul(r, tape.param(params, "fuse.wv")?)?;
            let logits = tape.scale(tape.matmul(q, tape.transpose(k)?)?, 1.0 / (config.d_h as f64).sqrt());
            let alpha = tape.softmax(logits)?;
            let ctx = tape.matmul(alpha, v)?;
            tape.matmul(ctx, proj)?
        }
    };
    debug_assert_eq!(tape.shape_of(fused), vec![config.d_rep]);
    Ok(fused)
}

/// Per-node temporal prediction. `history` holds one [d_h] representation
/// row per step for this node, oldest first. Returns (states, sigma2), each
/// [T, STATE_WIDTH]; row t is the prediction for the step after input t.
pub fn pctcn_predict(
    tape: &Tape,
    params: &Params,
    config: &PipnConfig,
    history: &[Value],
    event_step: Option<usize>,
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<(Value, Value), PipnError> {
    if history.is_empty() {
        return Err(PipnError::Invalid("temporal history must be non-empty".into()));
    }
    let t_len = history.len();
    let seq = tape.stack_rows(history)?;
    let mut x = tape.transpose(seq)?; // [d_h, T]
    let dilations = config.dilations();
    // the two largest dilations carry the event mask
    let masked_from = dilations.len().saturating_sub(2);
    let mut local_rng = dropout_rng;
    for (b, &dil) in dilations.iter().enumerate() {
        if config.dynamic_mask && b >= masked_from {
            if let Some(t0) = event_step {
                if t0 > 0 && t0 < t_len {
                    let mut mask = vec![1.0; config.d_h * t_len];
                    for c in 0..config.d_h {
                        for t in 0..t0 {
                            mask[c * t_len + t] = 0.0;
                        }
                    }
                    let m = tape.constant(Tensor { shape: vec![config.d_h, t_len], data: mask, requires_grad: false, grad: None });
                    x = tape.mul(x, m)?;
                }
            }
        }
        let w1 = tape.param(params, &format!("tcn{b}.conv1"))?;
        let w2 = tape.param(params, &format!("tcn{b}.conv2"))?;
        let b1 = tape.param(params, &format!("tcn{b}.bias1"))?;
        let b2 = tape.param(params, &format!("tcn{b}.bias2"))?;
        let mut y = tape.relu(tape.add_chan_bias(tape.conv1d_causal(x, w1, dil)?, b1)?);
        if let Some(rng) = local_rng.as_deref_mut() {
            y = tape.dropout(y, config.dropout, rng)?;
        }
        let mut y2 = tape.relu(tape.add_chan_bias(tape.conv1d_causal(y, w2, dil)?, b2)?);
        if let Some(rng) = local_rng.as_deref_mut() {
            y2 = tape.dropout(y2, config.dropout, rng)?;
        }
        x = tape.add(x, y2)?;
    }
    let feats = tape.transpose(x)?; // [T, d_h]
    let states = tape.add_bias(
        tape.matmul(feats, tape.param(params, "head.state")?)?,
        tape.param(params, "head.state_bias")?,
    )?;
    let sigma_logits = tape.add_bias(
        tape.matmul(feats, tape.param(params, "head.sigma")?)?,
        tape.param(params, "head.sigma_bias")?,
    )?;
    // exponential link keeps the variance strictly positive
    let sigma2 = tape.add_scalar(tape.exp(sigma_logits), config.sigma_floor);
    Ok((states, sigma2))
}

/// Per-node outputs of one full forward pass over a scene history.
pub struct PipnOutput {
    /// (states [T, 5], sigma2 [T, 5]) per node, node order = body order.
    pub per_node: Vec<(Value, Value)>,
    pub fused: Value,
}

/// Rebuild the per-step scenes of a truth rollout on top of the initial
/// scene, so masses and radii survive.
pub fn scenes_from_trajectory(initial: &WorldState, truth: &Trajectory) -> Vec<WorldState> {
    truth
        .states
        .iter()
        .map(|recs| {
            let mut w = initial.clone();
            for rec in recs {
                if let Some(b) = w.body_mut(rec.id) {
                    b.position = rec.position;
                    b.velocity = rec.velocity;
                    b.orientation = rec.orientation;
                }
            }
            w
        })
        .collect()
}

/// Full forward pass: one graph + attention stack per history step, then the
/// temporal stack per body. The last history step also produces the fused
/// hybrid vector.
pub fn pipn_forward(
    tape: &Tape,
    model: &PipnModel,
    scene_history: &[WorldState],
    radius: f64,
    task_tokens: &[Vec<f64>],
    event_step: Option<usize>,
    mut dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<PipnOutput, PipnError> {
    let first = scene_history.first().ok_or_else(|| PipnError::Invalid("empty scene history".into()))?;
    let n = first.bodies.len();
    let cfg = &model.config;
    let mut per_step: Vec<Value> = Vec::with_capacity(scene_history.len());
    let mut last_reps = None;
    for scene in scene_history {
        if scene.bodies.len() != n {
            return Err(PipnError::Invalid("body count changed mid-history".into()));
        }
        let graph = build_graph(scene, radius, cfg.d_h)?;
        let reps = physgcn_forward(tape, &model.params, cfg, &graph)?;
        if let Some(r) = reps {
            per_step.push(r);
            last_reps = Some(r);
        }
    }
    let task_vec = encode_task(tape, &model.params, cfg, task_tokens)?;
    let fused = fuse(tape, &model.params, cfg, task_vec, last_reps)?;
    let mut per_node = Vec::with_capacity(n);
    for i in 0..n {
        let history: Vec<Value> = per_step.iter().map(|r| tape.row(*r, i)).collect::<Result<_, _>>()?;
        per_node.push(pctcn_predict(tape, &model.params, cfg, &history, event_step, dropout_rng.as_deref_mut())?);
    }
    Ok(PipnOutput { per_node, fused })
}

/// Detach a forward pass into a plain trajectory (prediction row t is the
/// state at truth step t + 1, so the dumped trajectory starts one step in).
pub fn predicted_trajectory(tape: &Tape, output: &PipnOutput, template: &Trajectory) -> Trajectory {
    let t_len = output
        .per_node
        .first()
        .map(|(s, _)| tape.shape_of(*s)[0])
        .unwrap_or(0);
    let mut states = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mut row = Vec::with_capacity(output.per_node.len());
        for (k, (s, _)) in output.per_node.iter().enumerate() {
            let v = tape.value_of(*s);
            let base = t * STATE_WIDTH;
            row.push(BodyRecord {
                id: template.body_ids[k],
                position: [v.data[base], v.data[base + 1]],
                orientation: v.data[base + 2],
                velocity: [v.data[base + 3], v.data[base + 4]],
            });
        }
        states.push(row);
    }
    Trajectory {
        dt: template.dt,
        body_ids: template.body_ids.clone(),
        masses: template.masses.clone(),
        states,
        events: Vec::new(),
    }
}

/// Tokens describing the prediction task (dt, horizon, gravity), one one-hot
/// tagged row each.
pub fn default_task_tokens(config: &PipnConfig, dt: f64, horizon: usize, gravity: f64) -> Vec<Vec<f64>> {
    let w = config.task_token_width;
    let mut tokens = Vec::new();
    for (slot, value) in [(0usize, dt), (1, horizon as f64), (2, gravity)] {
        let mut t = vec![0.0; w];
        t[slot.min(w - 1)] = 1.0;
        t[w - 1] = value;
        tokens.push(t);
    }
    tokens
}
