//! Graded response to the failure level of the previous step.

use serde::{Deserialize, Serialize};

use super::memory::GlobalMemory;
use crate::trigger::FailureLevel;

/// Retries allowed for an isolated local issue.
pub const LOCAL_RETRY_LIMIT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "directive")]
pub enum RecoveryDirective {
    None,
    /// Let the reactive controller retry the failed action once.
    LocalRetry {
        attempts: u32,
    },
    /// Escalate with the recent failure trace as negative evidence.
    EscalateWithTrace,
    /// Clear short-term memory and force a fresh plan.
    FlushAndReplan,
}

impl RecoveryDirective {
    pub fn forces_escalation(self) -> bool {
        matches!(self, RecoveryDirective::EscalateWithTrace | RecoveryDirective::FlushAndReplan)
    }

    /// Apply side effects on short-term memory.
    pub fn apply(self, memory: &mut GlobalMemory) {
        if self == RecoveryDirective::FlushAndReplan {
            memory.flush();
        }
    }
}

pub fn apply_recovery_policy(level: FailureLevel) -> RecoveryDirective {
    match level {
        FailureLevel::Normal => RecoveryDirective::None,
        FailureLevel::LocalIssue => RecoveryDirective::LocalRetry { attempts: LOCAL_RETRY_LIMIT },
        FailureLevel::HardFailure => RecoveryDirective::EscalateWithTrace,
        FailureLevel::PlanInvalid => RecoveryDirective::FlushAndReplan,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::ActionId;
    use crate::runtime::memory::GlobalEntry;

    #[test]
    fn levels_map_to_directives() {
        assert_eq!(apply_recovery_policy(FailureLevel::Normal), RecoveryDirective::None);
        let retry = apply_recovery_policy(FailureLevel::LocalIssue);
        assert_eq!(retry, RecoveryDirective::LocalRetry { attempts: 1 });
        assert!(!retry.forces_escalation());
        assert!(apply_recovery_policy(FailureLevel::HardFailure).forces_escalation());
    }

    #[test]
    fn plan_invalid_flushes_window() {
        let mut m = GlobalMemory::new(5);
        m.push(GlobalEntry { step: 1, digest: "d".into(), action: ActionId::new("wait"), feedback: String::new() });
        let d = apply_recovery_policy(FailureLevel::PlanInvalid);
        d.apply(&mut m);
        assert!(m.entries().is_empty());
        assert!(d.forces_escalation());
        let mut kept = GlobalMemory::new(5);
        kept.push(GlobalEntry { step: 1, digest: "d".into(), action: ActionId::new("wait"), feedback: String::new() });
        apply_recovery_policy(FailureLevel::Normal).apply(&mut kept);
        assert_eq!(kept.entries().len(), 1);
    }
}
