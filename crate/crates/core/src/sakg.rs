//! State-action knowledge graph of validated transitions.
//!
//! Nodes are states keyed by their canonical text and carry a unit embedding;
//! edges are `(state, action, next_state)` transitions with execution and
//! success counts. Retrieval embeds the query, takes the `k` nearest nodes by
//! cosine similarity, drops those under the similarity threshold and ranks each
//! surviving fragment by `β_C·C + β_P·P`, where `P` is the success rate of the
//! fragment's best outgoing action.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::hash::Hasher;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::action::ActionId;
use crate::error::{Error, Result};
use crate::text::{canonical_text, normalize_text};
use crate::time::Timestamp;

/// Turns state text into a fixed-dimension unit vector.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>>;
}

/// Signed feature hashing over normalized tokens.
///
/// Each token lands in `PROBES` buckets with pseudo-random signs, so unrelated
/// texts come out nearly orthogonal.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
    seed: u64,
}

impl HashingEmbedder {
    pub const DEFAULT_DIM: usize = 256;
    const PROBES: u64 = 4;

    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashingEmbedder { dim, seed }
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder::new(Self::DEFAULT_DIM, 42)
    }
}

impl Embedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let tokens = normalize_text(text);
        if tokens.is_empty() {
            return Err(Error::invalid("cannot embed empty text"));
        }
        let mut v = vec![0.0; self.dim];
        for token in &tokens {
            for probe in 0..Self::PROBES {
                let mut h = FnvHasher::with_key(self.seed);
                h.write_u64(probe);
                h.write(token.as_bytes());
                let bits = h.finish();
                let sign = if bits >> 63 == 0 { 1.0 } else { -1.0 };
                v[(bits % self.dim as u64) as usize] += sign;
            }
        }
        unit(v).ok_or_else(|| Error::invalid(format!("text {text:?} hashes to a zero vector")))
    }
}

/// Lookup table of externally computed embeddings keyed by canonical state text.
#[derive(Debug, Clone, Default)]
pub struct PrecomputedEmbedder {
    dim: usize,
    table: BTreeMap<String, Vec<f64>>,
}

impl PrecomputedEmbedder {
    pub fn new(dim: usize) -> Self {
        PrecomputedEmbedder { dim, table: BTreeMap::new() }
    }

    pub fn insert(&mut self, text: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::invalid(format!("embedding has {} dims, expected {}", vector.len(), self.dim)));
        }
        let v = unit(vector).ok_or_else(|| Error::invalid("zero embedding"))?;
        self.table.insert(canonical_text(text), v);
        Ok(())
    }
}

impl Embedder for PrecomputedEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        self.table.get(&canonical_text(text)).cloned().ok_or_else(|| Error::NotFound(format!("no embedding for {text:?}")))
    }
}

fn unit(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n.is_nan() || n <= 1e-12 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n);
    Some(v)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KgConfig {
    /// `τ_KG`
    pub similarity_threshold: f64,
    pub top_k: usize,
    /// `β_C`
    pub similarity_weight: f64,
    /// `β_P`
    pub success_weight: f64,
    pub max_entries: usize,
    /// EMA rate for edge rewards.
    pub ema_rate: f64,
}

impl Default for KgConfig {
    fn default() -> Self {
        KgConfig { similarity_threshold: 0.85, top_k: 5, similarity_weight: 0.6, success_weight: 0.4, max_entries: 10_000, ema_rate: 0.3 }
    }
}

impl KgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 || self.max_entries < 2 {
            return Err(Error::invalid("graph top_k must be ≥ 1 and max_entries ≥ 2"));
        }
        if !(self.ema_rate > 0.0 && self.ema_rate <= 1.0) {
            return Err(Error::invalid("graph EMA rate must lie in (0, 1]"));
        }
        Ok(())
    }
}

pub type NodeId = u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateNode {
    pub id: NodeId,
    pub state_text: String,
    pub embedding: Vec<f64>,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEdge {
    pub from: NodeId,
    pub to: NodeId,
    pub action: ActionId,
    pub exec_count: u64,
    pub success_count: u64,
    pub reward_ema: f64,
}

impl ActionEdge {
    pub fn success_rate(&self) -> f64 {
        self.success_count as f64 / self.exec_count.max(1) as f64
    }
}

/// Best-first order: success rate, then execution count, then action id.
///
/// Rates are compared exactly by cross-multiplication.
pub fn edge_order(a: &ActionEdge, b: &ActionEdge) -> Ordering {
    let lhs = u128::from(b.success_count) * u128::from(a.exec_count.max(1));
    let rhs = u128::from(a.success_count) * u128::from(b.exec_count.max(1));
    lhs.cmp(&rhs).then_with(|| b.exec_count.cmp(&a.exec_count)).then_with(|| a.action.cmp(&b.action)).then_with(|| a.to.cmp(&b.to))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphFragment {
    pub node: StateNode,
    /// Outgoing edges, best first.
    pub best_edges: Vec<ActionEdge>,
    /// `C_j`
    pub similarity: f64,
}

impl GraphFragment {
    pub fn best(&self) -> Option<&ActionEdge> {
        self.best_edges.first()
    }
}

/// `β_C·C + β_P·P`, with `P = 0` for a fragment without outgoing edges.
pub fn score_fragment(f: &GraphFragment, cfg: &KgConfig) -> f64 {
    let p = f.best().map_or(0.0, ActionEdge::success_rate);
    cfg.similarity_weight * f.similarity + cfg.success_weight * p
}

/// Best action per fragment with its fragment score, in fragment order.
pub fn fragment_action_scores(fragments: &[GraphFragment], cfg: &KgConfig) -> Vec<(ActionId, f64)> {
    fragments.iter().filter_map(|f| f.best().map(|e| (e.action.clone(), score_fragment(f, cfg)))).collect()
}

#[derive(Clone)]
pub struct KnowledgeGraph {
    cfg: KgConfig,
    embedder: Arc<dyn Embedder>,
    nodes: BTreeMap<NodeId, StateNode>,
    by_key: BTreeMap<String, NodeId>,
    out: BTreeMap<NodeId, BTreeMap<(ActionId, NodeId), ActionEdge>>,
    next_id: NodeId,
}

impl fmt::Debug for KnowledgeGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KnowledgeGraph")
            .field("cfg", &self.cfg)
            .field("nodes", &self.nodes.len())
            .field("edges", &self.edge_count())
            .finish()
    }
}

impl KnowledgeGraph {
    pub fn new(cfg: KgConfig, embedder: Arc<dyn Embedder>) -> Self {
        KnowledgeGraph { cfg, embedder, nodes: BTreeMap::new(), by_key: BTreeMap::new(), out: BTreeMap::new(), next_id: 0 }
    }

    pub fn with_hashing(cfg: KgConfig) -> Self {
        Self::new(cfg, Arc::new(HashingEmbedder::default()))
    }

    pub fn config(&self) -> &KgConfig {
        &self.cfg
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out.values().map(BTreeMap::len).sum()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &StateNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &ActionEdge> {
        self.out.values().flat_map(BTreeMap::values)
    }

    pub fn node(&self, id: NodeId) -> Option<&StateNode> {
        self.nodes.get(&id)
    }

    pub fn find(&self, state_text: &str) -> Option<&StateNode> {
        self.by_key.get(&canonical_text(state_text)).and_then(|id| self.nodes.get(id))
    }

    pub fn outgoing(&self, id: NodeId) -> impl Iterator<Item = &ActionEdge> {
        self.out.get(&id).into_iter().flat_map(BTreeMap::values)
    }

    fn out_exec(&self, id: NodeId) -> u64 {
        self.outgoing(id).map(|e| e.exec_count).sum()
    }

    fn evict_one(&mut self, protect: &BTreeSet<NodeId>) {
        let victim = self
            .nodes
            .values()
            .filter(|n| !protect.contains(&n.id))
            .min_by_key(|n| (self.out_exec(n.id), n.created_at, n.id))
            .map(|n| n.id);
        let Some(victim) = victim else { return };
        let node = self.nodes.remove(&victim).expect("victim exists");
        self.by_key.remove(&canonical_text(&node.state_text));
        self.out.remove(&victim);
        for edges in self.out.values_mut() {
            edges.retain(|(_, to), _| *to != victim);
        }
    }

    fn ensure_node(&mut self, text: &str, now: Timestamp, protect: &BTreeSet<NodeId>) -> Result<NodeId> {
        let key = canonical_text(text);
        if let Some(&id) = self.by_key.get(&key) {
            return Ok(id);
        }
        let embedding = self.embedder.embed(text)?;
        while self.nodes.len() >= self.cfg.max_entries {
            let before = self.nodes.len();
            self.evict_one(protect);
            if self.nodes.len() == before {
                break;
            }
        }
        let id = self.next_id;
        self.next_id += 1;
        self.nodes.insert(id, StateNode { id, state_text: text.to_owned(), embedding, created_at: now });
        self.by_key.insert(key, id);
        Ok(id)
    }

    /// Record one validated transition. Callers must have passed the write gate.
    pub fn upsert_transition(
        &mut self,
        state: &str,
        action: &ActionId,
        next_state: &str,
        success: bool,
        reward: f64,
        now: Timestamp,
    ) -> Result<ActionEdge> {
        let from = self.ensure_node(state, now, &BTreeSet::new())?;
        let to = self.ensure_node(next_state, now, &BTreeSet::from([from]))?;
        let eta = self.cfg.ema_rate;
        let edge = self.out.entry(from).or_default().entry((action.clone(), to)).or_insert_with(|| ActionEdge {
            from,
            to,
            action: action.clone(),
            exec_count: 0,
            success_count: 0,
            reward_ema: 0.0,
        });
        edge.exec_count += 1;
        edge.success_count += u64::from(success);
        edge.reward_ema = (1.0 - eta) * edge.reward_ema + eta * reward;
        Ok(edge.clone())
    }

    /// Outgoing edges of `id`, best first.
    pub fn ranked_edges(&self, id: NodeId) -> Vec<ActionEdge> {
        let mut edges: Vec<_> = self.outgoing(id).cloned().collect();
        edges.sort_by(edge_order);
        edges
    }

    pub fn best_action(&self, id: NodeId) -> Result<ActionEdge> {
        self.outgoing(id)
            .min_by(|a, b| edge_order(a, b))
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("node {id} has no outgoing edges")))
    }

    /// Nearest `top_k` nodes to `query` that clear the similarity threshold.
    pub fn query_fragments(&self, query: &str) -> Result<Vec<GraphFragment>> {
        if self.nodes.is_empty() {
            return Ok(Vec::new());
        }
        let q = self.embedder.embed(query)?;
        let mut scored: Vec<(f64, NodeId)> = self.nodes.values().map(|n| (cosine(&q, &n.embedding), n.id)).collect();
        let nearest = |a: &(f64, NodeId), b: &(f64, NodeId)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        let k = self.cfg.top_k.min(scored.len());
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, nearest);
            scored.truncate(k);
        }
        scored.sort_by(nearest);
        Ok(scored
            .into_iter()
            .filter(|(sim, _)| *sim >= self.cfg.similarity_threshold)
            .map(|(similarity, id)| GraphFragment { node: self.nodes[&id].clone(), best_edges: self.ranked_edges(id), similarity })
            .collect())
    }

    /// Replace node embeddings with externally computed vectors keyed by state text.
    ///
    /// Unknown states become edge-less nodes. Returns the number of vectors applied.
    pub fn import_embeddings<I>(&mut self, rows: I, now: Timestamp) -> Result<usize>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let dim = self.embedder.dim();
        let mut applied = 0;
        for (text, vector) in rows {
            if vector.len() != dim {
                return Err(Error::invalid(format!("embedding for {text:?} has {} dims, expected {dim}", vector.len())));
            }
            let v = unit(vector).ok_or_else(|| Error::invalid(format!("zero embedding for {text:?}")))?;
            let key = canonical_text(&text);
            let id = match self.by_key.get(&key) {
                Some(&id) => id,
                None => {
                    let id = self.next_id;
                    self.next_id += 1;
                    self.by_key.insert(key, id);
                    self.nodes.insert(id, StateNode { id, state_text: text, embedding: Vec::new(), created_at: now });
                    id
                }
            };
            self.nodes.get_mut(&id).expect("node present").embedding = v;
            applied += 1;
        }
        Ok(applied)
    }

    pub fn save_jsonl(&self, nodes_path: &Path, edges_path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(nodes_path)?);
        for n in self.nodes.values() {
            serde_json::to_writer(&mut out, n)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        let mut out = BufWriter::new(File::create(edges_path)?);
        for e in self.edges() {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load_jsonl(nodes_path: &Path, edges_path: &Path, cfg: KgConfig, embedder: Arc<dyn Embedder>) -> Result<Self> {
        let mut g = KnowledgeGraph::new(cfg, embedder);
        let dim = g.embedder.dim();
        for (line, node) in read_jsonl::<StateNode>(nodes_path)? {
            if node.embedding.len() != dim {
                return Err(Error::Parse {
                    path: nodes_path.display().to_string(),
                    line,
                    message: format!("embedding has {} dims, expected {dim}", node.embedding.len()),
                });
            }
            g.next_id = g.next_id.max(node.id + 1);
            g.by_key.insert(canonical_text(&node.state_text), node.id);
            g.nodes.insert(node.id, node);
        }
        for (line, edge) in read_jsonl::<ActionEdge>(edges_path)? {
            let bad = |message: &str| Error::Parse { path: edges_path.display().to_string(), line, message: message.into() };
            if !g.nodes.contains_key(&edge.from) || !g.nodes.contains_key(&edge.to) {
                return Err(bad("edge references an unknown node"));
            }
            if edge.success_count > edge.exec_count || edge.exec_count == 0 {
                return Err(bad("edge counts are inconsistent"));
            }
            g.out.entry(edge.from).or_default().insert((edge.action.clone(), edge.to), edge);
        }
        Ok(g)
    }
}

pub(crate) fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        rows.push((i + 1, value));
    }
    Ok(rows)
}
