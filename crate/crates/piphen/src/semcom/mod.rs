//! Semantic communication plane: value-gated sharing, knowledge deltas, a
//! consistent-hashing knowledge index, and a deterministic discrete-event
//! network with exact byte accounting.

mod delta;
mod dht;
mod item;
mod net;
mod value;
mod wire;

pub use delta::{
    apply_delta, delta_header_bytes, edge_key, encode_delta, serialize_graph, FieldEdit,
    Fields, KnowledgeDelta, KnowledgeGraph,
};
pub use dht::{DhtLookup, DhtRing, VNODES_PER_NODE};
pub use item::{embed_tokens, tier_for_field, KnowledgeItem, Tier, EMBED_WIDTH};
pub use net::{LinkConfig, LinkStats, NetMessage, NetSim};
pub use value::{
    novelty, redundancy, relevance, should_share, value_score, CacheEntry, ShareDecision,
    ValueWeights, CACHE_WINDOW,
};
pub use wire::{decode_frame, encode_frame, FrameKind, WIRE_VERSION};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SemcomError {
    #[error("invalid semcom input: {0}")]
    Invalid(String),
    #[error("delta targets base version {expected}, graph is at {found}")]
    VersionConflict { expected: u64, found: u64 },
    #[error("no link configured from {src} to {dst}")]
    NoLink { src: u32, dst: u32 },
}

/// Ratio of representation bytes to the raw observation bytes they replace.
pub fn compression_report(raw_bytes: u64, representation_bytes: u64) -> Result<f64, SemcomError> {
    if raw_bytes == 0 {
        return Err(SemcomError::Invalid("raw observation has zero size".into()));
    }
    Ok(representation_bytes as f64 / raw_bytes as f64)
}
