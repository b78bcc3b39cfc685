//! Information-value gating: V = w_r·R + w_n·N − w_d·D against a dynamic
//! threshold θ = θ_base + β·load.

use serde::{Deserialize, Serialize};

use super::item::KnowledgeItem;
use super::SemcomError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueWeights {
    pub w_r: f64,
    pub w_n: f64,
    pub w_d: f64,
    pub theta_base: f64,
    pub beta: f64,
}

impl Default for ValueWeights {
    fn default() -> Self {
        ValueWeights { w_r: 0.5, w_n: 0.3, w_d: 0.2, theta_base: 0.4, beta: 0.4 }
    }
}

impl ValueWeights {
    pub fn validate(&self) -> Result<(), SemcomError> {
        if self.w_r < 0.0 || self.w_n < 0.0 || self.w_d < 0.0 {
            return Err(SemcomError::Invalid("value weights must be non-negative".into()));
        }
        Ok(())
    }
}

fn cosine(a: &[f64], b: &[f64]) -> Result<f64, SemcomError> {
    if a.len() != b.len() {
        return Err(SemcomError::Invalid("embedding widths differ".into()));
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(SemcomError::Invalid("cosine similarity of a zero vector".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb))
}

/// Cosine similarity between the task embedding and the item embedding.
pub fn relevance(task_emb: &[f64], item_emb: &[f64]) -> Result<f64, SemcomError> {
    cosine(task_emb, item_emb)
}

/// 1 − max similarity over the local knowledge base; empty KB → 1.
pub fn novelty(item_emb: &[f64], kb: &[KnowledgeItem]) -> Result<f64, SemcomError> {
    let mut max_sim = f64::NEG_INFINITY;
    for other in kb {
        max_sim = max_sim.max(cosine(item_emb, &other.embedding)?);
    }
    if kb.is_empty() {
        return Ok(1.0);
    }
    Ok(1.0 - max_sim)
}

/// Entry in the short-term shared cache of recently transmitted knowledge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub embedding: Vec<f64>,
    /// Simulated step at which the item was sent or received.
    pub sent_at: u64,
}

/// Max similarity over cache entries within the window; empty window → 0.
pub fn redundancy(
    item_emb: &[f64],
    cache: &[CacheEntry],
    now: u64,
    window: u64,
) -> Result<f64, SemcomError> {
    let mut max_sim: Option<f64> = None;
    for entry in cache {
        if now.saturating_sub(entry.sent_at) > window {
            continue;
        }
        let sim = cosine(item_emb, &entry.embedding)?;
        max_sim = Some(max_sim.map_or(sim, |m: f64| m.max(sim)));
    }
    Ok(max_sim.unwrap_or(0.0))
}

/// Default width of the redundancy window in simulated steps.
pub const CACHE_WINDOW: u64 = 50;

pub fn value_score(
    item: &KnowledgeItem,
    task_emb: &[f64],
    kb: &[KnowledgeItem],
    cache: &[CacheEntry],
    now: u64,
    weights: &ValueWeights,
) -> Result<f64, SemcomError> {
    weights.validate()?;
    let r = relevance(task_emb, &item.embedding)?;
    let n = novelty(&item.embedding, kb)?;
    let d = redundancy(&item.embedding, cache, now, CACHE_WINDOW)?;
    Ok(weights.w_r * r + weights.w_n * n - weights.w_d * d)
}

/// Gate decision plus the threshold it was taken against, for logging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShareDecision {
    pub share: bool,
    pub threshold: f64,
}

/// Share iff V strictly exceeds θ_base + β·load. `load` is the utilized
/// fraction of configured bandwidth over a sliding window.
pub fn should_share(v: f64, load: f64, weights: &ValueWeights) -> Result<ShareDecision, SemcomError> {
    if !(0.0..=1.0).contains(&load) {
        return Err(SemcomError::Invalid(format!("load {load} outside [0,1]")));
    }
    let threshold = weights.theta_base + weights.beta * load;
    Ok(ShareDecision { share: v > threshold, threshold })
}
