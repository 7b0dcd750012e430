//! Admission rule for long-term memory writes.

use serde::{Deserialize, Serialize};

use crate::trigger::{FailureLevel, RunnerFeedback};

/// Minimum reflection confidence for knowledge-graph promotion.
pub const PROMOTION_CONFIDENCE: f64 = 0.7;
/// Steps after a failure within which a success counts as recovery.
pub const RECOVERY_WINDOW: u32 = 3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecResult {
    /// Progress observed, no invalid action, no execution error.
    pub succeeded: bool,
    pub task_completed: bool,
    /// A success within `RECOVERY_WINDOW` steps of a failure.
    pub interpretable_recovery: bool,
    /// A successful step that followed the planner's proposal unmodified.
    pub planner_validated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionVerdict {
    pub success: bool,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WriteDecision {
    Write,
    Skip,
}

impl WriteDecision {
    fn from_bool(write: bool) -> Self {
        if write {
            WriteDecision::Write
        } else {
            WriteDecision::Skip
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateDecision {
    pub bank: WriteDecision,
    pub graph: WriteDecision,
}

pub fn memory_write_gate(exec: &ExecResult, verdict: &ReflectionVerdict) -> GateDecision {
    let succeeded = exec.succeeded || exec.task_completed;
    let promotable = exec.task_completed || exec.interpretable_recovery || exec.planner_validated;
    let validated = verdict.success && verdict.confidence >= PROMOTION_CONFIDENCE;
    GateDecision { bank: WriteDecision::from_bool(succeeded), graph: WriteDecision::from_bool(succeeded && promotable && validated) }
}

/// Deterministic verdict read off the runner feedback.
///
/// Completion or confirmed productive execution gives full confidence; other
/// observable changes give 0.8; anything else is not a success.
pub fn reflect_on_feedback(fb: &RunnerFeedback, level: FailureLevel) -> ReflectionVerdict {
    let clean = level == FailureLevel::Normal && !fb.invalid_action && !fb.execution_error;
    let confidence = if !clean {
        0.0
    } else if fb.task_or_subgoal_completed || fb.productive_execution_confirmed {
        1.0
    } else if fb.any_progress() {
        0.8
    } else {
        0.0
    };
    ReflectionVerdict { success: confidence > 0.0, confidence }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SURE: ReflectionVerdict = ReflectionVerdict { success: true, confidence: 1.0 };

    #[test]
    fn failed_action_skips_both() {
        let g = memory_write_gate(&ExecResult::default(), &SURE);
        assert_eq!(g, GateDecision { bank: WriteDecision::Skip, graph: WriteDecision::Skip });
    }

    #[test]
    fn success_writes_bank_only_without_promotion() {
        let exec = ExecResult { succeeded: true, ..Default::default() };
        let g = memory_write_gate(&exec, &SURE);
        assert_eq!(g.bank, WriteDecision::Write);
        assert_eq!(g.graph, WriteDecision::Skip);
    }

    #[test]
    fn low_confidence_recovery_is_not_promoted() {
        let exec = ExecResult { succeeded: true, interpretable_recovery: true, ..Default::default() };
        let weak = ReflectionVerdict { success: true, confidence: 0.69 };
        assert_eq!(memory_write_gate(&exec, &weak).graph, WriteDecision::Skip);
        let ok = ReflectionVerdict { success: true, confidence: 0.7 };
        assert_eq!(memory_write_gate(&exec, &ok).graph, WriteDecision::Write);
    }

    #[test]
    fn verdict_from_feedback() {
        let moved = RunnerFeedback { position_or_facing_changed: true, ..Default::default() };
        assert_eq!(reflect_on_feedback(&moved, FailureLevel::Normal).confidence, 0.8);
        assert!(!reflect_on_feedback(&moved, FailureLevel::LocalIssue).success);
        assert!(!reflect_on_feedback(&RunnerFeedback::default(), FailureLevel::Normal).success);
    }
}
