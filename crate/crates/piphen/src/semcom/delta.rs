//! Versioned knowledge graphs and minimal edit-script deltas between them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::SemcomError;

pub type Fields = BTreeMap<String, String>;

/// A physical knowledge graph: nodes and directed edges, each carrying a
/// string field map. All containers are ordered so serialization is
/// deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    pub version: u64,
    pub nodes: BTreeMap<u32, Fields>,
    /// Keyed by `edge_key(src, dst)`.
    pub edges: BTreeMap<String, Fields>,
}

pub fn edge_key(src: u32, dst: u32) -> String {
    format!("{src}->{dst}")
}

pub fn serialize_graph(g: &KnowledgeGraph) -> Vec<u8> {
    serde_json::to_vec(g).expect("graph serialization is infallible")
}

/// Per-entity field edits: assignments and removals.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FieldEdit {
    #[serde(rename = "s")]
    pub set: Fields,
    #[serde(rename = "r")]
    pub remove: Vec<String>,
}

impl FieldEdit {
    fn between(base: &Fields, target: &Fields) -> Option<FieldEdit> {
        let mut edit = FieldEdit::default();
        for (k, v) in target {
            if base.get(k) != Some(v) {
                edit.set.insert(k.clone(), v.clone());
            }
        }
        for k in base.keys() {
            if !target.contains_key(k) {
                edit.remove.push(k.clone());
            }
        }
        if edit.set.is_empty() && edit.remove.is_empty() {
            None
        } else {
            Some(edit)
        }
    }

    fn apply(&self, fields: &mut Fields) {
        for (k, v) in &self.set {
            fields.insert(k.clone(), v.clone());
        }
        for k in &self.remove {
            fields.remove(k);
        }
    }
}

/// Edit script from one graph version to another. Applying it to its exact
/// base reproduces the target byte-for-byte.
// wire field names are shortened so the fixed header stays small relative
// to the edits it carries
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeDelta {
    #[serde(rename = "bv")]
    pub base_version: u64,
    #[serde(rename = "tv")]
    pub target_version: u64,
    #[serde(rename = "ni")]
    pub node_inserts: BTreeMap<u32, Fields>,
    #[serde(rename = "nd")]
    pub node_deletes: Vec<u32>,
    #[serde(rename = "nc")]
    pub node_changes: BTreeMap<u32, FieldEdit>,
    #[serde(rename = "ei")]
    pub edge_inserts: BTreeMap<String, Fields>,
    #[serde(rename = "ed")]
    pub edge_deletes: Vec<String>,
    #[serde(rename = "ec")]
    pub edge_changes: BTreeMap<String, FieldEdit>,
}

impl KnowledgeDelta {
    pub fn is_empty(&self) -> bool {
        self.node_inserts.is_empty()
            && self.node_deletes.is_empty()
            && self.node_changes.is_empty()
            && self.edge_inserts.is_empty()
            && self.edge_deletes.is_empty()
            && self.edge_changes.is_empty()
    }

    /// Exact serialized length.
    pub fn byte_size(&self) -> u64 {
        serde_json::to_vec(self).expect("delta serialization is infallible").len() as u64
    }
}

/// Serialized size of a delta that carries no edits. Every delta costs at
/// least this header.
pub fn delta_header_bytes() -> u64 {
    KnowledgeDelta {
        base_version: 0,
        target_version: 0,
        node_inserts: BTreeMap::new(),
        node_deletes: Vec::new(),
        node_changes: BTreeMap::new(),
        edge_inserts: BTreeMap::new(),
        edge_deletes: Vec::new(),
        edge_changes: BTreeMap::new(),
    }
    .byte_size()
}

pub fn encode_delta(base: &KnowledgeGraph, target: &KnowledgeGraph) -> KnowledgeDelta {
    let mut delta = KnowledgeDelta {
        base_version: base.version,
        target_version: target.version,
        node_inserts: BTreeMap::new(),
        node_deletes: Vec::new(),
        node_changes: BTreeMap::new(),
        edge_inserts: BTreeMap::new(),
        edge_deletes: Vec::new(),
        edge_changes: BTreeMap::new(),
    };
    for (id, fields) in &target.nodes {
        match base.nodes.get(id) {
            None => {
                delta.node_inserts.insert(*id, fields.clone());
            }
            Some(old) => {
                if let Some(edit) = FieldEdit::between(old, fields) {
                    delta.node_changes.insert(*id, edit);
                }
            }
        }
    }
    delta.node_deletes =
        base.nodes.keys().filter(|id| !target.nodes.contains_key(id)).copied().collect();
    for (key, fields) in &target.edges {
        match base.edges.get(key) {
            None => {
                delta.edge_inserts.insert(key.clone(), fields.clone());
            }
            Some(old) => {
                if let Some(edit) = FieldEdit::between(old, fields) {
                    delta.edge_changes.insert(key.clone(), edit);
                }
            }
        }
    }
    let target_edges: BTreeSet<&String> = target.edges.keys().collect();
    delta.edge_deletes =
        base.edges.keys().filter(|k| !target_edges.contains(k)).cloned().collect();
    delta
}

pub fn apply_delta(
    base: &KnowledgeGraph,
    delta: &KnowledgeDelta,
) -> Result<KnowledgeGraph, SemcomError> {
    if base.version != delta.base_version {
        return Err(SemcomError::VersionConflict {
            expected: delta.base_version,
            found: base.version,
        });
    }
    let mut out = base.clone();
    out.version = delta.target_version;
    for id in &delta.node_deletes {
        out.nodes.remove(id);
    }
    for (id, fields) in &delta.node_inserts {
        out.nodes.insert(*id, fields.clone());
    }
    for (id, edit) in &delta.node_changes {
        let fields = out.nodes.get_mut(id).ok_or_else(|| {
            SemcomError::Invalid(format!("delta changes unknown node {id}"))
        })?;
        edit.apply(fields);
    }
    for key in &delta.edge_deletes {
        out.edges.remove(key);
    }
    for (key, fields) in &delta.edge_inserts {
        out.edges.insert(key.clone(), fields.clone());
    }
    for (key, edit) in &delta.edge_changes {
        let fields = out.edges.get_mut(key).ok_or_else(|| {
            SemcomError::Invalid(format!("delta changes unknown edge {key}"))
        })?;
        edit.apply(fields);
    }
    Ok(out)
}
