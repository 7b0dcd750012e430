//! Large-model call accounting.
//!
//! Every completion request is charged here, whichever controller makes it.
//! Visual encoding, vector lookups, trigger evaluation and environment steps
//! never pass through the ledger.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CallKind {
    Reflection,
    TaskReasoning,
    ActionProposal,
    ReactiveSelection,
    MemoryQuery,
    Summarization,
    Retry,
    Replanning,
    TransportRetry,
    FormatRetry,
}

/// Which controller issued a call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Strategic,
    Reactive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];
    /// Calls per step of the four-call reference protocol the budgets derive from.
    pub const REFERENCE_CALLS_PER_STEP: u64 = 4;

    pub fn step_cap(self) -> u32 {
        match self {
            Difficulty::Easy => 30,
            Difficulty::Medium => 50,
            Difficulty::Hard => 150,
        }
    }

    pub fn call_budget(self) -> u64 {
        u64::from(self.step_cap()) * Self::REFERENCE_CALLS_PER_STEP
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        })
    }
}

/// Stopping rule: a fixed number of environment steps, or a fixed call budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetMode {
    StepCapped,
    CallBudgeted,
}

impl std::str::FromStr for BudgetMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "step-capped" => Ok(BudgetMode::StepCapped),
            "call-budgeted" => Ok(BudgetMode::CallBudgeted),
            other => Err(format!("unknown mode {other:?} (expected step-capped or call-budgeted)")),
        }
    }
}

impl fmt::Display for BudgetMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BudgetMode::StepCapped => "step-capped",
            BudgetMode::CallBudgeted => "call-budgeted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("call budget of {budget} exhausted")]
pub struct BudgetExhausted {
    pub budget: u64,
}

/// Totals at a point in time; differences of two snapshots give per-step deltas.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerTotals {
    pub calls: u64,
    pub strategic_calls: u64,
    pub reactive_calls: u64,
    pub tokens_in: u64,
    pub tokens_out: u64,
}

impl LedgerTotals {
    pub fn since(&self, earlier: &LedgerTotals) -> LedgerTotals {
        LedgerTotals {
            calls: self.calls - earlier.calls,
            strategic_calls: self.strategic_calls - earlier.strategic_calls,
            reactive_calls: self.reactive_calls - earlier.reactive_calls,
            tokens_in: self.tokens_in - earlier.tokens_in,
            tokens_out: self.tokens_out - earlier.tokens_out,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    calls_by_kind: BTreeMap<CallKind, u64>,
    totals: LedgerTotals,
    /// `None` means unlimited (step-capped runs).
    budget: Option<u64>,
    difficulty: Difficulty,
}

impl BudgetLedger {
    pub fn unlimited(difficulty: Difficulty) -> Self {
        BudgetLedger { calls_by_kind: BTreeMap::new(), totals: LedgerTotals::default(), budget: None, difficulty }
    }

    pub fn with_budget(difficulty: Difficulty, budget: u64) -> Self {
        BudgetLedger { budget: Some(budget), ..Self::unlimited(difficulty) }
    }

    /// Ledger for `mode`: unlimited when step-capped, `4 × step cap` when call-budgeted.
    pub fn for_mode(mode: BudgetMode, difficulty: Difficulty) -> Self {
        match mode {
            BudgetMode::StepCapped => Self::unlimited(difficulty),
            BudgetMode::CallBudgeted => Self::with_budget(difficulty, difficulty.call_budget()),
        }
    }

    pub fn budget(&self) -> Option<u64> {
        self.budget
    }

    pub fn difficulty(&self) -> Difficulty {
        self.difficulty
    }

    pub fn totals(&self) -> LedgerTotals {
        self.totals
    }

    pub fn total_calls(&self) -> u64 {
        self.totals.calls
    }

    pub fn calls(&self, kind: CallKind) -> u64 {
        self.calls_by_kind.get(&kind).copied().unwrap_or(0)
    }

    pub fn calls_by_kind(&self) -> &BTreeMap<CallKind, u64> {
        &self.calls_by_kind
    }

    pub fn is_exhausted(&self) -> bool {
        self.budget.is_some_and(|b| self.totals.calls >= b)
    }

    /// Charge one completion request.
    ///
    /// Fails without charging when the budget is already spent; the call that
    /// reaches the budget exactly is still admitted.
    pub fn account_call(&mut self, role: Role, kind: CallKind, tokens_in: u64, tokens_out: u64) -> Result<(), BudgetExhausted> {
        if let Some(budget) = self.budget {
            if self.totals.calls >= budget {
                return Err(BudgetExhausted { budget });
            }
        }
        *self.calls_by_kind.entry(kind).or_insert(0) += 1;
        self.totals.calls += 1;
        match role {
            Role::Strategic => self.totals.strategic_calls += 1,
            Role::Reactive => self.totals.reactive_calls += 1,
        }
        self.totals.tokens_in += tokens_in;
        self.totals.tokens_out += tokens_out;
        Ok(())
    }
}

/// Rough token estimate for scripted controllers: four characters per token.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budgets_are_four_times_step_caps() {
        let caps: Vec<_> = Difficulty::ALL.iter().map(|d| d.step_cap()).collect();
        let budgets: Vec<_> = Difficulty::ALL.iter().map(|d| d.call_budget()).collect();
        assert_eq!(caps, [30, 50, 150]);
        assert_eq!(budgets, [120, 200, 600]);
    }

    #[test]
    fn retries_are_counted_separately() {
        let mut l = BudgetLedger::unlimited(Difficulty::Easy);
        for _ in 0..3 {
            l.account_call(Role::Strategic, CallKind::ActionProposal, 10, 5).unwrap();
        }
        l.account_call(Role::Strategic, CallKind::Retry, 10, 5).unwrap();
        assert_eq!(l.total_calls(), 4);
        assert_eq!(l.calls(CallKind::Retry), 1);
        assert_eq!(l.calls(CallKind::ActionProposal), 3);
        assert_eq!(l.totals().tokens_in, 40);
        assert_eq!(BudgetLedger::unlimited(Difficulty::Hard).total_calls(), 0);
    }

    #[test]
    fn four_calls_per_step_spend_easy_budget_in_thirty_steps() {
        let mut l = BudgetLedger::for_mode(BudgetMode::CallBudgeted, Difficulty::Easy);
        let kinds = [CallKind::Summarization, CallKind::TaskReasoning, CallKind::ActionProposal, CallKind::ReactiveSelection];
        let mut steps = 0;
        'outer: loop {
            for k in kinds {
                if l.account_call(Role::Strategic, k, 1, 1).is_err() {
                    break 'outer;
                }
            }
            steps += 1;
        }
        assert_eq!(steps, 30);
        assert_eq!(l.total_calls(), 120);
        assert!(l.is_exhausted());
        assert_eq!(l.account_call(Role::Reactive, CallKind::ReactiveSelection, 0, 0), Err(BudgetExhausted { budget: 120 }));
        assert_eq!(l.total_calls(), 120);
    }

    #[test]
    fn token_estimate() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abcde"), 2);
    }
}
