//! Browser bindings: run a built-in scenario, probe the trigger, fuse scores.
//!
//! Every export takes and returns JSON strings so the page needs no glue
//! beyond `JSON.parse`.

use deliberate::fusion::{fuse, FusionConfig};
use deliberate::harness::{run_scripted, AgentProfile};
use deliberate::runtime::{BudgetMode, LoopConfig};
use deliberate::sim::pack;
use deliberate::trigger::{evaluate_clauses, FailureLevel, ThresholdConfig, TriggerSignals, NAMED_SETTINGS};
use deliberate::ActionId;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn agent_cell(state: &str) -> Option<[usize; 2]> {
    let mut words = state.split_whitespace().skip(1);
    Some([words.next()?.parse().ok()?, words.next()?.parse().ok()?])
}

fn thresholds(setting: &str) -> Result<ThresholdConfig, String> {
    ThresholdConfig::named(setting).map_err(|e| e.to_string())
}

pub fn catalog() -> Value {
    json!({ "scenarios": pack::all_names(), "settings": NAMED_SETTINGS })
}

/// Runs one episode and returns the per-step trace the page animates.
pub fn episode(name: &str, setting: &str, mode: &str, seed: u32) -> Result<Value, String> {
    let scenario = pack::get(name).map_err(|e| e.to_string())?;
    let mode: BudgetMode = mode.parse().map_err(|e: String| e)?;
    let cfg = LoopConfig { thresholds: thresholds(setting)?, ..LoopConfig::default() };
    let log = run_scripted(&scenario, &cfg, mode, AgentProfile::Triggered, u64::from(seed), 0).map_err(|e| e.to_string())?;
    let steps: Vec<Value> = log
        .steps
        .iter()
        .map(|s| {
            json!({
                "step": s.step,
                "escalated": s.g,
                "clauses": s.clauses,
                "reasons": s.trigger_reasons,
                "decision": s.decision,
                "action": s.action,
                "from": agent_cell(&s.state),
                "to": agent_cell(&s.next_state),
                "signals": s.signals,
                "stuck": s.stuck,
                "calls": s.ledger_delta.calls,
            })
        })
        .collect();
    let per_step = log.end.ledger.strategic_calls as f64 / f64::from(log.end.steps.max(1));
    Ok(json!({
        "scenario": scenario.name,
        "description": scenario.description,
        "map": scenario.map,
        "events": scenario.events,
        "status": log.end.status,
        "steps": steps,
        "calls": log.end.ledger.calls,
        "strategic_calls": log.end.ledger.strategic_calls,
        "strategic_calls_per_step": per_step,
    }))
}

/// Evaluates the escalation predicate for hand-set signals.
pub fn trigger(setting: &str, since: u32, visual: f64, stall: u32, repetition: u32, level: u8) -> Result<Value, String> {
    let th = thresholds(setting)?;
    let signals = TriggerSignals {
        since_strategic: since,
        visual_change: visual,
        zero_progress: stall,
        repetition,
        failure_level: FailureLevel::try_from(level).map_err(|e| e.to_string())?,
        ..Default::default()
    };
    let clauses = evaluate_clauses(&signals, &th);
    Ok(json!({ "escalate": clauses.any(), "clauses": clauses.fired() }))
}

fn score_list(text: &str) -> Result<Vec<(ActionId, f64)>, String> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let pairs: Vec<(String, f64)> = serde_json::from_str(text).map_err(|e| format!("expected [[action, score], ...]: {e}"))?;
    Ok(pairs.into_iter().map(|(a, s)| (ActionId::new(a), s)).collect())
}

/// Fuses memory-bank and graph scores given as `[[action, score], ...]`.
pub fn fusion(bank: &str, graph: &str) -> Result<Value, String> {
    let bank = score_list(bank)?;
    let graph = score_list(graph)?;
    let graph = (!graph.is_empty()).then_some(graph.as_slice());
    serde_json::to_value(fuse(&bank, graph, &FusionConfig::default())).map_err(|e| e.to_string())
}

fn to_js(v: Result<Value, String>) -> Result<String, JsError> {
    v.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn scenario_catalog() -> String {
    catalog().to_string()
}

#[wasm_bindgen]
pub fn run_scenario(name: &str, setting: &str, mode: &str, seed: u32) -> Result<String, JsError> {
    to_js(episode(name, setting, mode, seed))
}

#[wasm_bindgen]
pub fn evaluate_trigger(setting: &str, since: u32, visual: f64, stall: u32, repetition: u32, level: u8) -> Result<String, JsError> {
    to_js(trigger(setting, since, visual, stall, repetition, level))
}

#[wasm_bindgen]
pub fn fuse_scores(bank: &str, graph: &str) -> Result<String, JsError> {
    to_js(fusion(bank, graph))
}
