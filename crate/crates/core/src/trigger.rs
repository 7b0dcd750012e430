//! Event trigger: per-step signal bookkeeping and the escalation predicate.
//!
//! A step escalates to the strategic controller when any of five clauses
//! holds:
//!
//! ```text
//! c ≥ T  ∨  d > τ_v  ∨  z ≥ τ_z  ∨  (r ≥ τ_r ∧ z ≥ τ_rz)  ∨  ℓ ≥ τ_ℓ
//! ```
//!
//! `c` counts reactive steps since the last strategic call, `d` is the visual
//! change distance, `z` the zero-progress streak, `r` the same-action tail
//! within the last `W` actions and `ℓ` the graded failure level.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::action::ActionId;
use crate::error::{Error, Result};

/// Periodic refresh interval `T`; `Unbounded` disables the periodic clause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RefreshRepr", into = "RefreshRepr")]
pub enum RefreshInterval {
    Steps(u32),
    Unbounded,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RefreshRepr {
    Steps(u32),
    Word(String),
}

impl TryFrom<RefreshRepr> for RefreshInterval {
    type Error = String;

    fn try_from(r: RefreshRepr) -> Result<Self, String> {
        match r {
            RefreshRepr::Steps(0) => Err("refresh interval must be at least 1".into()),
            RefreshRepr::Steps(n) => Ok(RefreshInterval::Steps(n)),
            RefreshRepr::Word(w) if w == "unbounded" => Ok(RefreshInterval::Unbounded),
            RefreshRepr::Word(w) => Err(format!("expected a step count or \"unbounded\", got {w:?}")),
        }
    }
}

impl From<RefreshInterval> for RefreshRepr {
    fn from(r: RefreshInterval) -> Self {
        match r {
            RefreshInterval::Steps(n) => RefreshRepr::Steps(n),
            RefreshInterval::Unbounded => RefreshRepr::Word("unbounded".into()),
        }
    }
}

impl RefreshInterval {
    pub fn steps(self) -> Option<u32> {
        match self {
            RefreshInterval::Steps(n) => Some(n),
            RefreshInterval::Unbounded => None,
        }
    }
}

impl fmt::Display for RefreshInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RefreshInterval::Steps(n) => write!(f, "{n}"),
            RefreshInterval::Unbounded => f.write_str("unbounded"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    /// `T`
    pub refresh_interval: RefreshInterval,
    /// `W`, the action-history window.
    pub history_window: usize,
    /// `τ_v`, strict: fires when `d > τ_v`.
    pub visual_threshold: f64,
    /// `τ_z`
    pub stall_threshold: u32,
    /// `τ_r`
    pub repetition_threshold: u32,
    /// `τ_rz`, the zero-progress streak required alongside repetition.
    pub repeat_stall_threshold: u32,
    /// `τ_ℓ`
    pub failure_threshold: FailureLevel,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            refresh_interval: RefreshInterval::Steps(4),
            history_window: 5,
            visual_threshold: 0.35,
            stall_threshold: 4,
            repetition_threshold: 5,
            repeat_stall_threshold: 2,
            failure_threshold: FailureLevel::HardFailure,
        }
    }
}

/// Named threshold-sensitivity settings. `W` stays at 5 for all of them.
pub const NAMED_SETTINGS: [&str; 4] = ["more-strategic", "default", "more-reactive", "no-periodic-refresh"];

impl ThresholdConfig {
    pub fn more_strategic() -> Self {
        ThresholdConfig {
            refresh_interval: RefreshInterval::Steps(3),
            visual_threshold: 0.30,
            stall_threshold: 3,
            repetition_threshold: 4,
            repeat_stall_threshold: 2,
            ..Self::default()
        }
    }

    pub fn more_reactive() -> Self {
        ThresholdConfig {
            refresh_interval: RefreshInterval::Steps(6),
            visual_threshold: 0.40,
            stall_threshold: 5,
            repetition_threshold: 5,
            repeat_stall_threshold: 3,
            ..Self::default()
        }
    }

    pub fn no_periodic_refresh() -> Self {
        ThresholdConfig { refresh_interval: RefreshInterval::Unbounded, ..Self::default() }
    }

    pub fn named(name: &str) -> Result<Self> {
        match name {
            "more-strategic" => Ok(Self::more_strategic()),
            "default" => Ok(Self::default()),
            "more-reactive" => Ok(Self::more_reactive()),
            "no-periodic-refresh" => Ok(Self::no_periodic_refresh()),
            other => Err(Error::invalid(format!("unknown threshold setting {other:?} (expected one of {})", NAMED_SETTINGS.join(", ")))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.history_window == 0 {
            return Err(Error::invalid("history window must be at least 1"));
        }
        if self.visual_threshold.is_nan() || self.visual_threshold < 0.0 {
            return Err(Error::invalid("visual threshold must be non-negative"));
        }
        Ok(())
    }
}

/// Graded execution failure, `ℓ ∈ {0,1,2,3}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum FailureLevel {
    #[default]
    Normal = 0,
    /// Isolated local issue; bounded local retry.
    LocalIssue = 1,
    /// Hard error, repeated invalid action or low-progress loop.
    HardFailure = 2,
    /// Hard failures recurring inside the window; the plan is invalid.
    PlanInvalid = 3,
}

impl TryFrom<u8> for FailureLevel {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            0 => Ok(FailureLevel::Normal),
            1 => Ok(FailureLevel::LocalIssue),
            2 => Ok(FailureLevel::HardFailure),
            3 => Ok(FailureLevel::PlanInvalid),
            _ => Err(format!("failure level out of range: {v}")),
        }
    }
}

impl From<FailureLevel> for u8 {
    fn from(l: FailureLevel) -> u8 {
        l as u8
    }
}

/// Raw runner feedback for one executed action.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunnerFeedback {
    pub task_or_subgoal_completed: bool,
    pub position_or_facing_changed: bool,
    pub selected_item_changed: bool,
    pub inventory_delta: bool,
    pub menu_or_dialogue_transition: bool,
    pub productive_execution_confirmed: bool,
    pub invalid_action: bool,
    pub execution_error: bool,
    pub structured_message: String,
}

impl RunnerFeedback {
    pub fn any_progress(&self) -> bool {
        self.task_or_subgoal_completed
            || self.position_or_facing_changed
            || self.selected_item_changed
            || self.inventory_delta
            || self.menu_or_dialogue_transition
            || self.productive_execution_confirmed
    }
}

/// Progress increment: 1 when any progress flag is set, else 0.
///
/// Invalid actions and execution errors never add progress on their own.
pub fn derive_progress_increment(fb: &RunnerFeedback) -> u64 {
    u64::from(fb.any_progress())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TriggerSignals {
    /// `c`
    pub since_strategic: u32,
    /// `d`
    pub visual_change: f64,
    /// `z`
    pub zero_progress: u32,
    /// `r`
    pub repetition: u32,
    /// `ℓ`
    pub failure_level: FailureLevel,
    /// `q`
    pub progress: u64,
    /// `Δ = q_t − q_{t−1}`
    pub progress_delta: u64,
}

/// Length of the identical-action suffix of `recent ++ [action]`, capped at `window`.
pub fn repetition_tail(recent: &[ActionId], action: &ActionId, window: usize) -> u32 {
    let tail = 1 + recent.iter().rev().take_while(|a| *a == action).count();
    tail.min(window) as u32
}

/// Fold one executed step into the signals.
///
/// `action` is the action whose outcome `fb` reports; `recent` holds the
/// actions before it (at most `W`, older ones are ignored). The failure level
/// is left untouched, see [`classify_failure`].
pub fn update_signals(
    prev: &TriggerSignals,
    visual_change: f64,
    fb: &RunnerFeedback,
    action: &ActionId,
    recent: &[ActionId],
    window: usize,
) -> TriggerSignals {
    let delta = derive_progress_increment(fb);
    let start = recent.len().saturating_sub(window);
    TriggerSignals {
        since_strategic: prev.since_strategic + 1,
        visual_change,
        zero_progress: if delta > 0 { 0 } else { prev.zero_progress + 1 },
        repetition: repetition_tail(&recent[start..], action, window),
        failure_level: prev.failure_level,
        progress: prev.progress + delta,
        progress_delta: delta,
    }
}

pub fn reset_after_strategic(s: &TriggerSignals) -> TriggerSignals {
    TriggerSignals { since_strategic: 0, ..*s }
}

/// Outcome of each of the five clauses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clauses {
    pub periodic: bool,
    pub visual: bool,
    pub stall: bool,
    pub repetition: bool,
    pub failure: bool,
}

impl Clauses {
    pub fn any(&self) -> bool {
        self.periodic || self.visual || self.stall || self.repetition || self.failure
    }

    /// Names of the clauses that fired, in predicate order.
    pub fn fired(&self) -> Vec<&'static str> {
        [
            (self.periodic, "periodic_refresh"),
            (self.visual, "scene_change"),
            (self.stall, "stall"),
            (self.repetition, "repetition"),
            (self.failure, "failure"),
        ]
        .into_iter()
        .filter_map(|(on, name)| on.then_some(name))
        .collect()
    }
}

pub fn evaluate_clauses(s: &TriggerSignals, th: &ThresholdConfig) -> Clauses {
    Clauses {
        periodic: th.refresh_interval.steps().is_some_and(|t| s.since_strategic >= t),
        visual: s.visual_change > th.visual_threshold,
        stall: s.zero_progress >= th.stall_threshold,
        repetition: s.repetition >= th.repetition_threshold && s.zero_progress >= th.repeat_stall_threshold,
        failure: s.failure_level >= th.failure_threshold,
    }
}

pub fn should_escalate(s: &TriggerSignals, th: &ThresholdConfig) -> bool {
    evaluate_clauses(s, th).any()
}

/// Failure levels of the last `W` executed steps, oldest first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FailureHistory {
    levels: VecDeque<FailureLevel>,
    window: usize,
}

impl FailureHistory {
    pub fn new(window: usize) -> Self {
        FailureHistory { levels: VecDeque::with_capacity(window), window }
    }

    pub fn push(&mut self, level: FailureLevel) {
        if self.window == 0 {
            return;
        }
        if self.levels.len() == self.window {
            self.levels.pop_front();
        }
        self.levels.push_back(level);
    }

    pub fn any_failure(&self) -> bool {
        self.levels.iter().any(|&l| l > FailureLevel::Normal)
    }

    pub fn any_hard(&self) -> bool {
        self.levels.iter().any(|&l| l >= FailureLevel::HardFailure)
    }

    pub fn levels(&self) -> impl Iterator<Item = FailureLevel> + '_ {
        self.levels.iter().copied()
    }
}

/// Grade the outcome of the step just executed.
///
/// `signals` must already include this step (see [`update_signals`]);
/// `recent` holds the levels of the preceding `W` steps.
pub fn classify_failure(fb: &RunnerFeedback, signals: &TriggerSignals, recent: &FailureHistory, th: &ThresholdConfig) -> FailureLevel {
    let low_progress_loop = signals.zero_progress >= th.stall_threshold && signals.repetition >= 2;
    let repeated_invalid = fb.invalid_action && recent.any_failure();
    let hard = fb.execution_error || repeated_invalid || low_progress_loop;
    if hard {
        if recent.any_hard() {
            FailureLevel::PlanInvalid
        } else {
            FailureLevel::HardFailure
        }
    } else if fb.invalid_action {
        FailureLevel::LocalIssue
    } else {
        FailureLevel::Normal
    }
}
