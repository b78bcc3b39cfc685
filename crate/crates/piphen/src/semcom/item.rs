//! Knowledge items: tiered payloads with deterministic hashed embeddings.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SemcomError;

pub const EMBED_WIDTH: usize = 64;

/// Core carries dynamic state needed for immediate coordination; Detail
/// carries slowly-changing or immutable attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tier {
    Core,
    Detail,
}

/// Dynamic state fields always classify Core; immutable attributes always
/// classify Detail.
pub fn tier_for_field(field: &str) -> Tier {
    match field {
        "position" | "velocity" | "orientation" | "momentum" | "contact" | "fire_intensity"
        | "carrying" | "goal" => Tier::Core,
        _ => Tier::Detail,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeItem {
    pub id: String,
    pub tier: Tier,
    /// Unit-norm (within 1e-9) embedding of width [`EMBED_WIDTH`].
    pub embedding: Vec<f64>,
    pub payload: Vec<u8>,
    /// Exact serialized length of the payload.
    pub byte_size: u64,
    /// Simulated step at which the item was produced.
    pub timestamp: u64,
}

impl KnowledgeItem {
    pub fn new(
        id: impl Into<String>,
        tier: Tier,
        embedding: Vec<f64>,
        payload: Vec<u8>,
        timestamp: u64,
    ) -> Result<Self, SemcomError> {
        if embedding.len() != EMBED_WIDTH {
            return Err(SemcomError::Invalid(format!(
                "embedding width {} != {EMBED_WIDTH}",
                embedding.len()
            )));
        }
        let norm = embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(SemcomError::Invalid(format!("embedding norm {norm} != 1")));
        }
        let byte_size = payload.len() as u64;
        Ok(KnowledgeItem { id: id.into(), tier, embedding, payload, byte_size, timestamp })
    }

    /// Convenience constructor that derives the embedding from attribute
    /// tokens describing the item.
    pub fn from_tokens(
        id: impl Into<String>,
        tier: Tier,
        tokens: &[&str],
        payload: Vec<u8>,
        timestamp: u64,
    ) -> Result<Self, SemcomError> {
        KnowledgeItem::new(id, tier, embed_tokens(tokens), payload, timestamp)
    }
}

/// Deterministic feature-hash embedding: each token adds ±1 at a hashed
/// coordinate; the sum is L2-normalized. The encoder is a stand-in for any
/// pluggable text embedder and needs no model weights.
pub fn embed_tokens(tokens: &[&str]) -> Vec<f64> {
    let mut v = vec![0.0; EMBED_WIDTH];
    for token in tokens {
        let digest = Sha256::digest(token.as_bytes());
        let idx = u64::from_le_bytes(digest[0..8].try_into().unwrap()) as usize % EMBED_WIDTH;
        let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
        v[idx] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        // all-cancelling or empty token sets fall back to a fixed basis vector
        v[0] = 1.0;
    } else {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embeddings_are_unit_norm_and_deterministic() {
        let a = embed_tokens(&["body", "mass", "1.0"]);
        let b = embed_tokens(&["body", "mass", "1.0"]);
        assert_eq!(a, b);
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() <= 1e-9);
        assert_eq!(embed_tokens(&[]).iter().map(|x| x * x).sum::<f64>(), 1.0);
    }

    #[test]
    fn item_validates_embedding() {
        let emb = embed_tokens(&["x"]);
        let item = KnowledgeItem::new("k1", Tier::Core, emb.clone(), vec![1, 2, 3], 7).unwrap();
        assert_eq!(item.byte_size, 3);
        assert_eq!(item.timestamp, 7);

        let mut bad = emb.clone();
        bad[0] += 0.5;
        assert!(KnowledgeItem::new("k2", Tier::Core, bad, vec![], 0).is_err());
        assert!(KnowledgeItem::new("k3", Tier::Core, vec![1.0; 3], vec![], 0).is_err());
    }

    #[test]
    fn tier_rule() {
        for f in ["position", "velocity", "orientation"] {
            assert_eq!(tier_for_field(f), Tier::Core);
        }
        for f in ["mass", "radius", "shape", "material"] {
            assert_eq!(tier_for_field(f), Tier::Detail);
        }
    }
}
