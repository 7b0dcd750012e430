//! Per-call min-max normalization and weighted fusion of the two memories.
//!
//! The memory-bank list is primary: only its actions are ranked, and each one
//! receives the largest normalized graph score among fragments proposing the
//! same action (zero when none does).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::action::ActionId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// `λ_MB`
    pub bank_weight: f64,
    /// `λ_KG`
    pub graph_weight: f64,
    /// Denominator guard `ε`.
    pub epsilon: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig { bank_weight: 0.75, graph_weight: 0.25, epsilon: 1e-9 }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::invalid("fusion epsilon must be positive"));
        }
        if !(self.bank_weight >= 0.0 && self.graph_weight >= 0.0) {
            return Err(Error::invalid("fusion weights must be non-negative"));
        }
        Ok(())
    }
}

/// `(x − min) / (max − min + ε)` over the list.
///
/// A singleton or constant list maps to zeros.
pub fn minmax_normalize(scores: &[f64], epsilon: f64) -> Vec<f64> {
    let Some(min) = scores.iter().copied().reduce(f64::min) else {
        return Vec::new();
    };
    let max = scores.iter().copied().fold(min, f64::max);
    scores.iter().map(|x| (x - min) / (max - min + epsilon)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedAction {
    pub action: ActionId,
    pub fused: f64,
    pub bank_raw: f64,
    pub bank_normalized: f64,
    pub graph_normalized: f64,
}

/// Fuse per-action scores from both memories, best first.
///
/// `bank` lists one raw score per candidate action. `graph` may repeat an
/// action; the largest normalized score per action wins. Ties are broken by
/// the higher raw bank score, then the smaller action id.
pub fn fuse(bank: &[(ActionId, f64)], graph: Option<&[(ActionId, f64)]>, cfg: &FusionConfig) -> Vec<FusedAction> {
    let bank_raw: Vec<f64> = bank.iter().map(|(_, s)| *s).collect();
    let bank_norm = minmax_normalize(&bank_raw, cfg.epsilon);

    let mut graph_best: BTreeMap<&ActionId, f64> = BTreeMap::new();
    if let Some(graph) = graph {
        let raw: Vec<f64> = graph.iter().map(|(_, s)| *s).collect();
        for ((action, _), norm) in graph.iter().zip(minmax_normalize(&raw, cfg.epsilon)) {
            let slot = graph_best.entry(action).or_insert(0.0);
            *slot = slot.max(norm);
        }
    }

    let mut fused: Vec<FusedAction> = bank
        .iter()
        .zip(bank_norm)
        .map(|((action, raw), norm)| {
            let g = graph_best.get(action).copied().unwrap_or(0.0);
            FusedAction {
                action: action.clone(),
                fused: cfg.bank_weight * norm + cfg.graph_weight * g,
                bank_raw: *raw,
                bank_normalized: norm,
                graph_normalized: g,
            }
        })
        .collect();
    fused.sort_by(|a, b| b.fused.total_cmp(&a.fused).then_with(|| b.bank_raw.total_cmp(&a.bank_raw)).then_with(|| a.action.cmp(&b.action)));
    fused
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(pairs: &[(&str, f64)]) -> Vec<(ActionId, f64)> {
        pairs.iter().map(|(a, s)| (ActionId::from(*a), *s)).collect()
    }

    #[test]
    fn normalize_examples() {
        let n = minmax_normalize(&[2.0, 4.0, 6.0], 1e-9);
        for (got, want) in n.iter().zip([0.0, 0.5, 1.0]) {
            assert!((got - want).abs() < 1e-8);
        }
        assert_eq!(minmax_normalize(&[5.0], 1e-9), vec![0.0]);
        assert_eq!(minmax_normalize(&[3.0, 3.0, 3.0], 1e-9), vec![0.0; 3]);
        assert!(minmax_normalize(&[], 1e-9).is_empty());
    }

    #[test]
    fn fused_weights() {
        let cfg = FusionConfig::default();
        let bank = scores(&[("a", 1.0), ("b", 0.0)]);
        let out = fuse(&bank, None, &cfg);
        assert_eq!(out[0].action.as_str(), "a");
        assert!((out[0].fused - 0.75).abs() < 1e-8);

        let graph = scores(&[("a", 0.9), ("b", 0.1)]);
        let out = fuse(&bank, Some(&graph), &cfg);
        assert!((out[0].fused - 1.0).abs() < 1e-8);
    }

    #[test]
    fn two_actions_without_graph_matches() {
        let cfg = FusionConfig::default();
        let bank = scores(&[("action1", 2.0), ("action2", 4.0)]);
        let graph = scores(&[("other", 0.8)]);
        let out = fuse(&bank, Some(&graph), &cfg);
        assert_eq!(out[0].action.as_str(), "action2");
        assert!((out[0].fused - 0.75).abs() < 1e-8);
        assert_eq!(out[1].fused, 0.0);
    }

    #[test]
    fn graph_duplicates_take_the_max() {
        let cfg = FusionConfig::default();
        let bank = scores(&[("a", 1.0), ("b", 1.0)]);
        let graph = scores(&[("b", 0.2), ("b", 0.9), ("a", 0.5)]);
        let out = fuse(&bank, Some(&graph), &cfg);
        assert_eq!(out[0].action.as_str(), "b");
        assert!((out[0].graph_normalized - 1.0).abs() < 1e-8);
    }

    #[test]
    fn ties_prefer_raw_bank_then_name() {
        let cfg = FusionConfig { bank_weight: 0.0, graph_weight: 1.0, epsilon: 1e-9 };
        let bank = scores(&[("b", 1.0), ("a", 1.0), ("c", 2.0)]);
        let order: Vec<_> = fuse(&bank, None, &cfg).into_iter().map(|f| f.action.to_string()).collect();
        assert_eq!(order, ["c", "a", "b"]);
    }
}
