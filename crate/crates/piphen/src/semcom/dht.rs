//! Consistent-hashing knowledge index: a static ring of nodes, 32 virtual
//! nodes each, with per-node key/value stores.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use super::item::KnowledgeItem;
use super::SemcomError;

pub const VNODES_PER_NODE: usize = 32;

fn hash64(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_le_bytes(digest[0..8].try_into().unwrap())
}

/// Ring membership is fixed at construction; routing is a pure function of
/// (key, membership).
#[derive(Debug, Clone)]
pub struct DhtRing {
    /// vnode position -> owning node id
    ring: BTreeMap<u64, u32>,
    stores: BTreeMap<u32, BTreeMap<String, KnowledgeItem>>,
}

pub enum DhtLookup {
    Found(KnowledgeItem),
    /// The responsible node has no value for the key. Distinct from any
    /// transport failure, which this in-process ring cannot produce.
    NotFound,
}

impl DhtRing {
    pub fn new(node_ids: &[u32]) -> Result<Self, SemcomError> {
        if node_ids.is_empty() {
            return Err(SemcomError::Invalid("ring needs at least one node".into()));
        }
        let mut ring = BTreeMap::new();
        let mut stores = BTreeMap::new();
        for &node in node_ids {
            if stores.insert(node, BTreeMap::new()).is_some() {
                return Err(SemcomError::Invalid(format!("duplicate node id {node}")));
            }
            for v in 0..VNODES_PER_NODE {
                ring.insert(hash64(format!("node:{node}:vnode:{v}").as_bytes()), node);
            }
        }
        Ok(DhtRing { ring, stores })
    }

    /// First vnode clockwise from the key's hash, wrapping at the top.
    pub fn responsible_node(&self, key: &str) -> u32 {
        let h = hash64(key.as_bytes());
        self.ring
            .range(h..)
            .next()
            .or_else(|| self.ring.iter().next())
            .map(|(_, &node)| node)
            .expect("ring is nonempty by construction")
    }

    pub fn dht_put(&mut self, key: &str, item: KnowledgeItem) -> u32 {
        let node = self.responsible_node(key);
        self.stores.get_mut(&node).expect("store exists").insert(key.to_string(), item);
        node
    }

    pub fn dht_get(&self, key: &str) -> DhtLookup {
        let node = self.responsible_node(key);
        match self.stores[&node].get(key) {
            Some(item) => DhtLookup::Found(item.clone()),
            None => DhtLookup::NotFound,
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = u32> + '_ {
        self.stores.keys().copied()
    }

    pub fn stored_count(&self, node: u32) -> usize {
        self.stores.get(&node).map_or(0, BTreeMap::len)
    }
}
