//! State-action memory bank: flat store of local state-action hints.
//!
//! Items are ranked by
//! `ρ · (α_C·C + α_L·L + α_R·R + α_P·P)` where `C` is token-frequency cosine,
//! `L` token Jaccard, `R = (clip(rewardEMA, -1, 1) + 1) / 2`,
//! `P = successes / max(1, attempts)` and `ρ = exp(-ageHours / 24)`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::action::ActionId;
use crate::error::{Error, Result};
pub use crate::text::{jaccard, normalize_text, token_cosine};
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SambWeights {
    /// `α_C`
    pub cosine: f64,
    /// `α_L`
    pub lexical: f64,
    /// `α_R`
    pub reward: f64,
    /// `α_P`
    pub reliability: f64,
    /// `η`
    pub ema_rate: f64,
    pub recency_decay_hours: f64,
    /// Semantic similarity at which a hint is flagged for the quick path.
    pub quick_path_threshold: f64,
    /// Semantic similarity at which a hint is flagged as directly adoptable.
    pub execution_threshold: f64,
    /// Hints handed to the reactive controller per step.
    pub hint_count: usize,
}

impl Default for SambWeights {
    fn default() -> Self {
        SambWeights {
            cosine: 0.55,
            lexical: 0.45,
            reward: 0.15,
            reliability: 0.10,
            ema_rate: 0.3,
            recency_decay_hours: 24.0,
            quick_path_threshold: 0.85,
            execution_threshold: 0.92,
            hint_count: 1,
        }
    }
}

impl SambWeights {
    pub fn validate(&self) -> Result<()> {
        let weights = [self.cosine, self.lexical, self.reward, self.reliability];
        if weights.iter().any(|w| w.is_nan() || *w < 0.0) {
            return Err(Error::invalid("memory bank weights must be non-negative"));
        }
        if !(self.ema_rate > 0.0 && self.ema_rate <= 1.0) {
            return Err(Error::invalid("EMA rate must lie in (0, 1]"));
        }
        if self.recency_decay_hours.is_nan() || self.recency_decay_hours <= 0.0 {
            return Err(Error::invalid("recency decay must be positive"));
        }
        if self.hint_count == 0 {
            return Err(Error::invalid("hint count must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryItem {
    pub key: String,
    pub state_summary: String,
    pub action_trace: Vec<ActionId>,
    pub reward_ema: f64,
    pub successes: u64,
    pub attempts: u64,
    pub created_at: Timestamp,
    pub last_write_at: Timestamp,
    pub source_tag: String,
}

impl MemoryItem {
    /// Fresh item with neutral reward and no recorded outcomes.
    pub fn new(
        key: impl Into<String>,
        state_summary: impl Into<String>,
        action_trace: Vec<ActionId>,
        now: Timestamp,
        source_tag: impl Into<String>,
    ) -> Self {
        MemoryItem {
            key: key.into(),
            state_summary: state_summary.into(),
            action_trace,
            reward_ema: 0.0,
            successes: 0,
            attempts: 0,
            created_at: now,
            last_write_at: now,
            source_tag: source_tag.into(),
        }
    }

    pub fn reward_term(&self) -> f64 {
        (self.reward_ema.clamp(-1.0, 1.0) + 1.0) / 2.0
    }

    pub fn reliability_term(&self) -> f64 {
        self.successes as f64 / self.attempts.max(1) as f64
    }

    fn check(&self) -> Result<()> {
        if self.successes > self.attempts {
            return Err(Error::invalid(format!("item {}: successes exceed attempts", self.key)));
        }
        if self.last_write_at < self.created_at {
            return Err(Error::invalid(format!("item {}: last write precedes creation", self.key)));
        }
        Ok(())
    }
}

/// Per-term view of one item's score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreBreakdown {
    pub cosine: f64,
    pub lexical: f64,
    pub reward: f64,
    pub reliability: f64,
    pub recency: f64,
    pub total: f64,
}

impl ScoreBreakdown {
    /// `(α_C·C + α_L·L) / (α_C + α_L)`, the part that measures similarity.
    pub fn semantic(&self, w: &SambWeights) -> f64 {
        let denom = w.cosine + w.lexical;
        if denom <= 0.0 {
            return 0.0;
        }
        (w.cosine * self.cosine + w.lexical * self.lexical) / denom
    }
}

pub fn score_breakdown(item: &MemoryItem, query: &str, now: Timestamp, w: &SambWeights) -> ScoreBreakdown {
    let q = normalize_text(query);
    let s = normalize_text(&item.state_summary);
    score_tokens(item, &q, &s, now, w)
}

fn score_tokens(item: &MemoryItem, q: &[String], s: &[String], now: Timestamp, w: &SambWeights) -> ScoreBreakdown {
    let cosine = token_cosine(q, s);
    let lexical = jaccard(q, s);
    let reward = item.reward_term();
    let reliability = item.reliability_term();
    let recency = (-now.hours_since(item.last_write_at) / w.recency_decay_hours).exp();
    let total = recency * (w.cosine * cosine + w.lexical * lexical + w.reward * reward + w.reliability * reliability);
    ScoreBreakdown { cosine, lexical, reward, reliability, recency, total }
}

pub fn score_item(item: &MemoryItem, query: &str, now: Timestamp, w: &SambWeights) -> f64 {
    score_breakdown(item, query, now, w).total
}

/// A retrieved item presented to the reactive controller. Hints are advisory only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hint {
    pub key: String,
    pub state_summary: String,
    pub action_trace: Vec<ActionId>,
    pub score: f64,
    pub semantic: f64,
    pub quick_path: bool,
    pub direct_adoption: bool,
}

#[derive(Debug, Clone, Default)]
pub struct StateActionBank {
    items: BTreeMap<String, MemoryItem>,
    weights: SambWeights,
}

impl StateActionBank {
    pub fn new(weights: SambWeights) -> Self {
        StateActionBank { items: BTreeMap::new(), weights }
    }

    pub fn weights(&self) -> &SambWeights {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&MemoryItem> {
        self.items.get(key)
    }

    pub fn items(&self) -> impl Iterator<Item = &MemoryItem> {
        self.items.values()
    }

    /// Store `item`, replacing any item with the same key.
    pub fn insert(&mut self, item: MemoryItem) -> String {
        let key = item.key.clone();
        self.items.insert(key.clone(), item);
        key
    }

    /// Fold one observed outcome into an item's reward EMA and success counts.
    pub fn record_outcome(&mut self, key: &str, reward: f64, success: bool, now: Timestamp) -> Result<&MemoryItem> {
        let eta = self.weights.ema_rate;
        let item = self.items.get_mut(key).ok_or_else(|| Error::NotFound(format!("memory item {key:?}")))?;
        item.reward_ema = (1.0 - eta) * item.reward_ema + eta * reward;
        item.attempts += 1;
        item.successes += u64::from(success);
        item.last_write_at = item.last_write_at.max(now);
        Ok(item)
    }

    /// Top-`k` items for `query`, best first.
    ///
    /// Ties go to the most recently written item, then the smaller key.
    pub fn retrieve_hints(&self, query: &str, k: usize, now: Timestamp) -> Vec<Hint> {
        let w = &self.weights;
        let q = normalize_text(query);
        let mut scored: Vec<(&MemoryItem, ScoreBreakdown)> = self
            .items
            .values()
            .map(|item| {
                let s = normalize_text(&item.state_summary);
                (item, score_tokens(item, &q, &s, now, w))
            })
            .collect();
        scored.sort_by(|(ia, sa), (ib, sb)| {
            sb.total.total_cmp(&sa.total).then_with(|| ib.last_write_at.cmp(&ia.last_write_at)).then_with(|| ia.key.cmp(&ib.key))
        });
        scored
            .into_iter()
            .take(k)
            .map(|(item, s)| {
                let semantic = s.semantic(w);
                Hint {
                    key: item.key.clone(),
                    state_summary: item.state_summary.clone(),
                    action_trace: item.action_trace.clone(),
                    score: s.total,
                    semantic,
                    quick_path: semantic >= w.quick_path_threshold,
                    direct_adoption: semantic >= w.execution_threshold,
                }
            })
            .collect()
    }

    /// Best memory-bank score per first action over the top-`k` items.
    pub fn action_scores(&self, query: &str, k: usize, now: Timestamp) -> Vec<(ActionId, f64)> {
        let mut best: BTreeMap<ActionId, f64> = BTreeMap::new();
        for hint in self.retrieve_hints(query, k, now) {
            if let Some(action) = hint.action_trace.first() {
                let slot = best.entry(action.clone()).or_insert(f64::NEG_INFINITY);
                *slot = slot.max(hint.score);
            }
        }
        best.into_iter().collect()
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for item in self.items.values() {
            serde_json::to_writer(&mut out, item)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load_jsonl(path: &Path, weights: SambWeights) -> Result<Self> {
        let mut bank = StateActionBank::new(weights);
        let reader = BufReader::new(File::open(path)?);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { path: path.display().to_string(), line: i + 1, message };
            let item: MemoryItem = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            item.check().map_err(|e| parse_err(e.to_string()))?;
            bank.insert(item);
        }
        Ok(bank)
    }
}
