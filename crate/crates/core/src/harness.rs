//! One-call helpers that run gridworld scenarios with the scripted controllers.

use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::controllers::{ScriptedReactive, ScriptedStrategic, StrategicCost};
use crate::error::Result;
use crate::runtime::{run_episode, BudgetLedger, BudgetMode, EpisodeLog, EpisodeMeta, LoopConfig, Memories};
use crate::sim::{Environment, GridWorld, Scenario};
use crate::trigger::RefreshInterval;

pub const DEFAULT_SEED: u64 = 42;

/// Controller wiring for an episode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentProfile {
    /// Event-triggered: staged strategic calls on escalation, one reactive call per step.
    #[default]
    Triggered,
    /// Replans every step at three calls plus one reactive call: four calls per step.
    FourCallsPerStep,
    /// Strategic planning is free; only the reactive call is charged.
    OneCallPerStep,
}

impl std::str::FromStr for AgentProfile {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "triggered" => Ok(AgentProfile::Triggered),
            "four-calls-per-step" => Ok(AgentProfile::FourCallsPerStep),
            "one-call-per-step" => Ok(AgentProfile::OneCallPerStep),
            other => Err(format!("unknown agent profile {other:?}")),
        }
    }
}

/// Stable 64-bit FNV digest of the effective configuration, as hex.
pub fn config_hash(cfg: &LoopConfig, mode: BudgetMode, profile: AgentProfile) -> String {
    let json = serde_json::to_string(&(cfg, mode, profile)).expect("config serializes");
    let mut h = FnvHasher::default();
    h.write(json.as_bytes());
    format!("{:016x}", h.finish())
}

/// Run `scenario` once with fresh memories.
pub fn run_scripted(
    scenario: &Scenario,
    cfg: &LoopConfig,
    mode: BudgetMode,
    profile: AgentProfile,
    seed: u64,
    run_index: u32,
) -> Result<EpisodeLog> {
    let mut memories = Memories::new(cfg);
    run_scripted_with(scenario, cfg, mode, profile, seed, run_index, &mut memories)
}

/// Run `scenario` once, reading and updating the given memories.
pub fn run_scripted_with(
    scenario: &Scenario,
    cfg: &LoopConfig,
    mode: BudgetMode,
    profile: AgentProfile,
    seed: u64,
    run_index: u32,
    memories: &mut Memories,
) -> Result<EpisodeLog> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    let (mut strategic, mut reactive) = (ScriptedStrategic::new(seed), ScriptedReactive::default());
    match profile {
        AgentProfile::Triggered => {}
        AgentProfile::FourCallsPerStep => {
            cfg.thresholds.refresh_interval = RefreshInterval::Steps(1);
            strategic = strategic.with_cost(StrategicCost::Flat(3)).without_reflection();
        }
        AgentProfile::OneCallPerStep => strategic = strategic.with_cost(StrategicCost::Flat(0)),
    }
    let mut env = GridWorld::new(scenario.clone(), seed)?;
    let mut ledger = BudgetLedger::for_mode(mode, env.difficulty());
    let meta = EpisodeMeta { scenario: scenario.name.clone(), seed, run_index, config_hash: config_hash(&cfg, mode, profile) };
    Ok(run_episode(&mut env, &cfg, mode, &meta, &mut strategic, &mut reactive, memories, &mut ledger))
}
