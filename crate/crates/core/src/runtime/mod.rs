//! The trigger, act, update cycle.
//!
//! Each step the loop evaluates the escalation predicate on signals carried
//! over from the previous step. On escalation it gathers graph and memory-bank
//! evidence, asks the strategic controller for a fresh proposal and resets the
//! refresh counter. The reactive controller then picks the action, the
//! environment executes it, signals and the failure grade are updated, and
//! the write gate decides which stores learn from the transition.

pub mod gate;
pub mod ledger;
pub mod log;
pub mod memory;
pub mod recovery;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub use gate::{memory_write_gate, reflect_on_feedback, ExecResult, GateDecision, ReflectionVerdict, WriteDecision};
pub use ledger::{BudgetExhausted, BudgetLedger, BudgetMode, CallKind, Difficulty, LedgerTotals, Role};
pub use log::{EpisodeEnd, EpisodeLog, EpisodeStatus, LogHeader, StepRecord};
pub use memory::{FailureRecord, GlobalEntry, GlobalMemory};
pub use recovery::{apply_recovery_policy, RecoveryDirective};

use crate::action::ActionId;
use crate::controllers::{
    validate_override, ControlError, DecisionKind, Proposal, ReactiveController, ReactiveDecision, ReactiveInput, StrategicContext,
    StrategicController,
};
use crate::error::Result;
use crate::fusion::{fuse, FusionConfig};
use crate::sakg::{fragment_action_scores, KgConfig, KnowledgeGraph};
use crate::samb::{SambWeights, StateActionBank};
use crate::sim::{EnvStep, Environment};
use crate::text::canonical_text;
use crate::time::Timestamp;
use crate::trigger::{
    classify_failure, evaluate_clauses, reset_after_strategic, update_signals, FailureHistory, FailureLevel, RunnerFeedback,
    ThresholdConfig, TriggerSignals,
};
use crate::visual::{encode, visual_distance, Descriptor};

/// Call-budgeted episodes also stop after this many multiples of the step cap.
pub const SAFETY_CAP_FACTOR: u32 = 10;
/// Action dispatched when the reactive controller escalates twice in one step.
pub const EMPTY_ACTION: &str = "wait";
/// Action name whose execution is expected to change position.
pub const MOVE_ACTION: &str = "move";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub thresholds: ThresholdConfig,
    pub memory_bank: SambWeights,
    pub knowledge_graph: KgConfig,
    pub fusion: FusionConfig,
    /// Memory-bank candidates pooled for fusion on escalation.
    pub fusion_pool: usize,
    /// Simulated seconds per environment step, used for memory timestamps.
    pub seconds_per_step: u64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            thresholds: ThresholdConfig::default(),
            memory_bank: SambWeights::default(),
            knowledge_graph: KgConfig::default(),
            fusion: FusionConfig::default(),
            fusion_pool: 5,
            seconds_per_step: 60,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        self.thresholds.validate()?;
        self.memory_bank.validate()?;
        self.knowledge_graph.validate()?;
        self.fusion.validate()?;
        if self.fusion_pool == 0 {
            return Err(crate::error::invalid("fusion_pool must be at least 1"));
        }
        Ok(())
    }
}

/// Long-term stores shared across the steps of an episode.
#[derive(Debug)]
pub struct Memories {
    pub bank: StateActionBank,
    pub graph: KnowledgeGraph,
}

impl Memories {
    pub fn new(cfg: &LoopConfig) -> Self {
        Memories { bank: StateActionBank::new(cfg.memory_bank), graph: KnowledgeGraph::with_hashing(cfg.knowledge_graph) }
    }
}

/// Identifying fields copied into the log header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeMeta {
    pub scenario: String,
    pub seed: u64,
    pub run_index: u32,
    pub config_hash: String,
}

/// Memory-bank key for a state-action pair.
pub fn bank_key(state: &str, action: &ActionId) -> String {
    format!("{} => {}", canonical_text(state), action)
}

fn feedback_text(fb: &RunnerFeedback) -> String {
    let flags = [
        (fb.position_or_facing_changed, "moved"),
        (fb.inventory_delta, "inventory"),
        (fb.menu_or_dialogue_transition, "menu"),
        (fb.selected_item_changed, "selected"),
        (fb.productive_execution_confirmed, "productive"),
        (fb.task_or_subgoal_completed, "completed"),
        (fb.invalid_action, "invalid"),
        (fb.execution_error, "error"),
    ];
    let mut parts: Vec<&str> = flags.iter().filter(|(on, _)| *on).map(|(_, n)| *n).collect();
    if parts.is_empty() {
        parts.push("nothing");
    }
    let mut out = parts.join(" ");
    if !fb.structured_message.is_empty() {
        out.push_str(": ");
        out.push_str(&fb.structured_message);
    }
    out
}

struct Active {
    proposal: Proposal,
    cursor: usize,
}

enum Stop {
    Budget,
    Context(String),
}

impl From<ControlError> for Stop {
    fn from(e: ControlError) -> Self {
        match e {
            ControlError::Budget(_) => Stop::Budget,
            ControlError::InvalidContext(m) => Stop::Context(m),
        }
    }
}

/// Run one episode to termination.
///
/// The ledger's budget decides termination in call-budgeted mode; step-capped
/// episodes stop after the difficulty's step cap.
#[allow(clippy::too_many_arguments)]
pub fn run_episode<E: Environment>(
    env: &mut E,
    cfg: &LoopConfig,
    mode: BudgetMode,
    meta: &EpisodeMeta,
    strategic: &mut dyn StrategicController<E::View>,
    reactive: &mut dyn ReactiveController<E::View>,
    memories: &mut Memories,
    ledger: &mut BudgetLedger,
) -> EpisodeLog {
    let th = &cfg.thresholds;
    let window = th.history_window;
    let difficulty = env.difficulty();
    let step_cap = match mode {
        BudgetMode::StepCapped => difficulty.step_cap(),
        BudgetMode::CallBudgeted => difficulty.step_cap() * SAFETY_CAP_FACTOR,
    };
    let header = LogHeader {
        scenario: meta.scenario.clone(),
        difficulty,
        mode,
        seed: meta.seed,
        run_index: meta.run_index,
        config_hash: meta.config_hash.clone(),
        step_cap,
        budget: ledger.budget(),
        thresholds: *th,
    };
    let mut steps: Vec<StepRecord> = Vec::new();
    let finish = |steps: Vec<StepRecord>, status, ledger: &BudgetLedger, message: Option<String>| EpisodeLog {
        header: header.clone(),
        end: EpisodeEnd {
            status,
            steps: steps.len() as u32,
            ledger: ledger.totals(),
            calls_by_kind: ledger.calls_by_kind().clone(),
            message,
        },
        steps,
    };

    let first = match env.reset() {
        Ok(obs) => obs,
        Err(e) => return finish(steps, EpisodeStatus::EnvFailure, ledger, Some(e.to_string())),
    };
    let mut prev_desc: Descriptor = match encode(&first.frame) {
        Ok(d) => d,
        Err(e) => return finish(steps, EpisodeStatus::EnvFailure, ledger, Some(e.to_string())),
    };
    let mut observation = first.ui_text;
    let mut signals = TriggerSignals::default();
    let mut history = FailureHistory::new(window);
    let mut recent: VecDeque<ActionId> = VecDeque::with_capacity(window);
    let mut global = GlobalMemory::new(window);
    let mut active: Option<Active> = None;
    let mut last_failure: Option<(u32, ActionId)> = None;

    for t in 1.. {
        if t > step_cap {
            return finish(steps, EpisodeStatus::StepCap, ledger, None);
        }
        let before = ledger.totals();
        let evaluated = signals;
        let now = Timestamp(u64::from(t) * cfg.seconds_per_step);
        let clauses = evaluate_clauses(&signals, th);
        let predicate = clauses.any();
        let directive = apply_recovery_policy(signals.failure_level);
        directive.apply(&mut global);
        let memory_window = global.entries().len();
        let mut reasons: Vec<String> = clauses.fired().into_iter().map(String::from).collect();
        if t == 1 {
            reasons.push("episode_start".into());
        }
        if directive == RecoveryDirective::FlushAndReplan {
            reasons.push("context_flush".into());
            active = None;
        }
        if active.is_none() && t > 1 {
            reasons.push("no_active_proposal".into());
        }
        let mut g = predicate || directive.forces_escalation() || active.is_none();

        let state = env.state_summary();
        let view = env.view();
        let valid = env.valid_actions();
        let mut fused = Vec::new();
        let mut new_proposal = None;
        let mut strategic_invoked = false;

        let mut replan = |reasons: &[String], fused: &mut Vec<_>, ledger: &mut BudgetLedger, global: &GlobalMemory| {
            let fragments = memories.graph.query_fragments(&state).unwrap_or_default();
            let graph_scores = fragment_action_scores(&fragments, &cfg.knowledge_graph);
            let bank_scores = memories.bank.action_scores(&state, cfg.fusion_pool, now);
            *fused = if bank_scores.is_empty() { Vec::new() } else { fuse(&bank_scores, Some(&graph_scores), &cfg.fusion) };
            let ctx = StrategicContext {
                step: t,
                observation: observation.clone(),
                state: state.clone(),
                task: env.task(),
                subtask: global.subgoal().map(String::from),
                failure_trace: global.failures(),
                global_window: global.entries(),
                evidence: fused.clone(),
                valid_actions: valid.clone(),
                trigger_reasons: reasons.to_vec(),
                horizon: th.refresh_interval.steps(),
            };
            strategic.plan(&ctx, &view, ledger)
        };

        if g {
            match replan(&reasons, &mut fused, ledger, &global) {
                Ok(p) => {
                    global.set_subgoal(&p.subgoal);
                    new_proposal = Some(p.clone());
                    active = Some(Active { proposal: p, cursor: 0 });
                }
                Err(e) => {
                    return match Stop::from(e) {
                        Stop::Budget => finish(steps, EpisodeStatus::BudgetExhausted, ledger, None),
                        Stop::Context(m) => finish(steps, EpisodeStatus::EnvFailure, ledger, Some(m)),
                    };
                }
            }
            strategic_invoked = true;
        }

        let hints = if g { Vec::new() } else { memories.bank.retrieve_hints(&state, cfg.memory_bank.hint_count, now) };
        let retry_action = last_failure.as_ref().filter(|(s, _)| *s + 1 == t).map(|(_, a)| a.clone());
        let local_retry = matches!(directive, RecoveryDirective::LocalRetry { .. });

        let mut ask = |active: &Active, attempt: u32, ledger: &mut BudgetLedger| {
            let input = ReactiveInput {
                proposal: &active.proposal,
                cursor: active.cursor,
                hints: &hints,
                valid_actions: &valid,
                state: &state,
                local_retry,
                last_failed: retry_action.as_ref(),
                attempt,
            };
            reactive.act(&input, &view, ledger)
        };

        let stop = |e: ControlError, steps: Vec<StepRecord>, ledger: &BudgetLedger| match Stop::from(e) {
            Stop::Budget => finish(steps, EpisodeStatus::BudgetExhausted, ledger, None),
            Stop::Context(m) => finish(steps, EpisodeStatus::EnvFailure, ledger, Some(m)),
        };

        let mut decision = match ask(active.as_ref().expect("proposal is active"), 0, ledger) {
            Ok(d) => d,
            Err(e) => return stop(e, steps, ledger),
        };
        let mut violation = None;
        if decision.kind == DecisionKind::Override {
            if let Err(v) = validate_override(&decision, &active.as_ref().expect("proposal is active").proposal) {
                violation = Some(v);
                decision = ReactiveDecision::escalate();
            }
        }
        if decision.kind == DecisionKind::Escalate && !strategic_invoked {
            g = true;
            reasons.push("reactive_escalation".into());
            match replan(&reasons, &mut fused, ledger, &global) {
                Ok(p) => {
                    global.set_subgoal(&p.subgoal);
                    new_proposal = Some(p.clone());
                    active = Some(Active { proposal: p, cursor: 0 });
                }
                Err(e) => return stop(e, steps, ledger),
            }
            strategic_invoked = true;
            decision = match ask(active.as_ref().expect("proposal is active"), 0, ledger) {
                Ok(d) => d,
                Err(e) => return stop(e, steps, ledger),
            };
            if decision.kind == DecisionKind::Override
                && validate_override(&decision, &active.as_ref().expect("proposal is active").proposal).is_err()
            {
                decision = ReactiveDecision::escalate();
            }
        }
        if strategic_invoked {
            signals = reset_after_strategic(&signals);
        }

        let mut format_retry = false;
        if let Some(a) = decision.action.clone() {
            if !valid.contains(&a) {
                format_retry = true;
                match ask(active.as_ref().expect("proposal is active"), 1, ledger) {
                    Ok(d) if d.is_well_formed() => decision = d,
                    Ok(_) => {}
                    Err(e) => return stop(e, steps, ledger),
                }
            }
        }
        let action = decision.action.clone().unwrap_or_else(|| ActionId::new(EMPTY_ACTION));
        if decision.kind == DecisionKind::Follow {
            if let Some(a) = active.as_mut() {
                a.cursor += 1;
            }
        }

        let EnvStep { frame, ui_text, feedback } = match env.step(&action) {
            Ok(s) => s,
            Err(e) => return finish(steps, EpisodeStatus::EnvFailure, ledger, Some(e.to_string())),
        };
        let desc = match encode(&frame) {
            Ok(d) => d,
            Err(e) => return finish(steps, EpisodeStatus::EnvFailure, ledger, Some(e.to_string())),
        };
        let d = visual_distance(&prev_desc, &desc).unwrap_or(0.0);
        prev_desc = desc;

        let recent_slice: Vec<ActionId> = recent.iter().cloned().collect();
        let mut next = update_signals(&signals, d, &feedback, &action, &recent_slice, window);
        let level = classify_failure(&feedback, &next, &history, th);
        next.failure_level = level;
        history.push(level);
        if recent.len() == window {
            recent.pop_front();
        }
        recent.push_back(action.clone());

        let next_state = env.state_summary();
        let blocked_move = action.name() == MOVE_ACTION && !feedback.position_or_facing_changed;
        let stuck = feedback.invalid_action || blocked_move || action.as_str() == EMPTY_ACTION;
        let succeeded = feedback.any_progress() && level == FailureLevel::Normal && !feedback.invalid_action && !feedback.execution_error;
        let exec = ExecResult {
            succeeded,
            task_completed: feedback.task_or_subgoal_completed,
            interpretable_recovery: succeeded && last_failure.as_ref().is_some_and(|(s, _)| t - s <= gate::RECOVERY_WINDOW),
            planner_validated: succeeded && decision.kind == DecisionKind::Follow,
        };
        let verdict = reflect_on_feedback(&feedback, level);
        let gate = memory_write_gate(&exec, &verdict);
        if gate.bank == WriteDecision::Write {
            let key = bank_key(&state, &action);
            if memories.bank.get(&key).is_none() {
                memories.bank.insert(crate::samb::MemoryItem::new(key.clone(), state.clone(), vec![action.clone()], now, "episode"));
            }
            let _ = memories.bank.record_outcome(&key, 1.0, true, now);
        }
        if gate.graph == WriteDecision::Write {
            let _ = memories.graph.upsert_transition(&state, &action, &next_state, true, 1.0, now);
        }
        if level != FailureLevel::Normal {
            last_failure = Some((t, action.clone()));
            global.record_failure(FailureRecord {
                step: t,
                state: state.clone(),
                action: action.clone(),
                level,
                message: feedback.structured_message.clone(),
            });
        }
        global.push(GlobalEntry { step: t, digest: observation.clone(), action: action.clone(), feedback: feedback_text(&feedback) });

        steps.push(StepRecord {
            step: t,
            state,
            observation: std::mem::replace(&mut observation, ui_text),
            signals: evaluated,
            clauses: clauses.fired().into_iter().map(String::from).collect(),
            predicate,
            g,
            trigger_reasons: if g { reasons } else { Vec::new() },
            directive,
            memory_window,
            strategic_invoked,
            proposal: new_proposal,
            fused,
            hints: hints.iter().map(|h| h.key.clone()).collect(),
            decision: decision.kind,
            override_category: decision.override_category.clone(),
            violation,
            format_retry,
            action,
            feedback,
            outcome_level: level,
            stuck,
            next_state,
            gate,
            ledger_delta: ledger.totals().since(&before),
        });
        signals = next;
        if env.is_success() {
            return finish(steps, EpisodeStatus::Success, ledger, None);
        }
    }
    unreachable!("the step loop only exits by returning")
}
