//! Controller contracts and the bounded-override validator.
//!
//! The strategic controller is invoked only on escalation and returns a short
//! proposal. The reactive controller runs every step: it follows the next
//! planned action, applies one of four local corrections, or hands control
//! back to the trigger. It may never change the active subgoal.

pub mod prompt;
pub mod scripted;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::action::ActionId;
use crate::error::{invalid, Result};
use crate::fusion::FusedAction;
use crate::runtime::ledger::{BudgetExhausted, BudgetLedger};
use crate::runtime::memory::{FailureRecord, GlobalEntry};
use crate::samb::Hint;

pub use scripted::{ScriptedReactive, ScriptedStrategic, StrategicCost};

/// Short-horizon plan issued by the strategic controller.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub subgoal: String,
    pub planned_actions: Vec<ActionId>,
    pub stop_condition: String,
    pub issued_at_step: u32,
    pub rationale: String,
}

impl Proposal {
    /// Validates `1 <= len <= max_len` and a nonempty subgoal.
    pub fn new(
        subgoal: impl Into<String>,
        planned_actions: Vec<ActionId>,
        stop_condition: impl Into<String>,
        issued_at_step: u32,
        rationale: impl Into<String>,
        max_len: usize,
    ) -> Result<Self> {
        let subgoal = subgoal.into();
        if subgoal.trim().is_empty() {
            return Err(invalid("proposal subgoal is empty"));
        }
        if planned_actions.is_empty() || planned_actions.len() > max_len {
            return Err(invalid(format!("proposal length {} outside 1..={max_len}", planned_actions.len())));
        }
        Ok(Proposal { subgoal, planned_actions, stop_condition: stop_condition.into(), issued_at_step, rationale: rationale.into() })
    }
}

/// Local correction classes the reactive controller may apply.
///
/// `Unlisted` carries a category name parsed from external output that is
/// not one of the four allowed classes; validation rejects it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum OverrideCategory {
    FacingAdjustment,
    ObstacleAvoidance,
    ToolReselection,
    OneStepRepositioning,
    Unlisted(String),
}

impl OverrideCategory {
    pub const ALLOWED: [OverrideCategory; 4] = [
        OverrideCategory::FacingAdjustment,
        OverrideCategory::ObstacleAvoidance,
        OverrideCategory::ToolReselection,
        OverrideCategory::OneStepRepositioning,
    ];

    pub fn as_str(&self) -> &str {
        match self {
            OverrideCategory::FacingAdjustment => "facing_adjustment",
            OverrideCategory::ObstacleAvoidance => "obstacle_avoidance",
            OverrideCategory::ToolReselection => "tool_reselection",
            OverrideCategory::OneStepRepositioning => "one_step_repositioning",
            OverrideCategory::Unlisted(s) => s,
        }
    }

    pub fn is_allowed(&self) -> bool {
        !matches!(self, OverrideCategory::Unlisted(_))
    }
}

impl From<String> for OverrideCategory {
    fn from(s: String) -> Self {
        Self::ALLOWED.into_iter().find(|c| c.as_str() == s).unwrap_or(OverrideCategory::Unlisted(s))
    }
}

impl From<OverrideCategory> for String {
    fn from(c: OverrideCategory) -> Self {
        c.as_str().to_string()
    }
}

impl fmt::Display for OverrideCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Follow,
    Override,
    Escalate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReactiveDecision {
    pub kind: DecisionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<ActionId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub override_category: Option<OverrideCategory>,
    /// Set when a decision tries to replace the active subgoal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subgoal_rewrite: Option<String>,
}

impl ReactiveDecision {
    pub fn follow(action: ActionId) -> Self {
        ReactiveDecision { kind: DecisionKind::Follow, action: Some(action), override_category: None, subgoal_rewrite: None }
    }

    pub fn correct(category: OverrideCategory, action: ActionId) -> Self {
        ReactiveDecision { kind: DecisionKind::Override, action: Some(action), override_category: Some(category), subgoal_rewrite: None }
    }

    pub fn escalate() -> Self {
        ReactiveDecision { kind: DecisionKind::Escalate, action: None, override_category: None, subgoal_rewrite: None }
    }

    /// Structural invariants between `kind`, `action` and `override_category`.
    pub fn is_well_formed(&self) -> bool {
        match self.kind {
            DecisionKind::Follow => self.action.is_some(),
            DecisionKind::Override => self.action.is_some() && self.override_category.is_some(),
            DecisionKind::Escalate => self.action.is_none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    #[error("decision is not an override")]
    NotAnOverride,
    #[error("override carries no action")]
    MissingAction,
    #[error("override carries no category")]
    MissingCategory,
    #[error("override category {0:?} is not allowed")]
    CategoryNotAllowed(String),
    #[error("override attempts to replace subgoal {from:?} with {to:?}")]
    SubgoalRewrite { from: String, to: String },
}

/// Checks that an override stays inside the bounded correction set and
/// leaves the proposal's subgoal alone.
pub fn validate_override(d: &ReactiveDecision, p: &Proposal) -> std::result::Result<(), Violation> {
    if d.kind != DecisionKind::Override {
        return Err(Violation::NotAnOverride);
    }
    let category = d.override_category.as_ref().ok_or(Violation::MissingCategory)?;
    if !category.is_allowed() {
        return Err(Violation::CategoryNotAllowed(category.as_str().to_string()));
    }
    if let Some(to) = &d.subgoal_rewrite {
        if *to != p.subgoal {
            return Err(Violation::SubgoalRewrite { from: p.subgoal.clone(), to: to.clone() });
        }
    }
    if d.action.is_none() {
        return Err(Violation::MissingAction);
    }
    Ok(())
}

/// Everything the strategic controller sees on escalation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategicContext {
    pub step: u32,
    pub observation: String,
    pub state: String,
    pub task: String,
    pub subtask: Option<String>,
    pub failure_trace: Vec<FailureRecord>,
    pub global_window: Vec<GlobalEntry>,
    pub evidence: Vec<FusedAction>,
    pub valid_actions: Vec<ActionId>,
    pub trigger_reasons: Vec<String>,
    /// Proposal length limit; `None` when the refresh interval is unbounded.
    pub horizon: Option<u32>,
}

/// Per-step input to the reactive controller.
#[derive(Debug, Clone, Copy)]
pub struct ReactiveInput<'a> {
    pub proposal: &'a Proposal,
    /// Index of the next planned action.
    pub cursor: usize,
    pub hints: &'a [Hint],
    pub valid_actions: &'a [ActionId],
    pub state: &'a str,
    /// One retry of `last_failed` is allowed.
    pub local_retry: bool,
    pub last_failed: Option<&'a ActionId>,
    /// 0 for the first selection this step, 1 for the schema retry.
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ControlError {
    #[error(transparent)]
    Budget(#[from] BudgetExhausted),
    #[error("invalid controller context: {0}")]
    InvalidContext(String),
}

pub trait StrategicController<V> {
    fn plan(&mut self, ctx: &StrategicContext, view: &V, ledger: &mut BudgetLedger) -> std::result::Result<Proposal, ControlError>;
}

pub trait ReactiveController<V> {
    fn act(
        &mut self,
        input: &ReactiveInput<'_>,
        view: &V,
        ledger: &mut BudgetLedger,
    ) -> std::result::Result<ReactiveDecision, ControlError>;
}
