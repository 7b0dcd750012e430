//! Short-term global memory: the last few steps plus failure summaries.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::action::ActionId;
use crate::trigger::FailureLevel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalEntry {
    pub step: u32,
    /// Plain-text observation digest.
    pub digest: String,
    pub action: ActionId,
    pub feedback: String,
}

/// A failed step, kept as negative evidence for replanning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub step: u32,
    pub state: String,
    pub action: ActionId,
    pub level: FailureLevel,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalMemory {
    capacity: usize,
    window: VecDeque<GlobalEntry>,
    failures: VecDeque<FailureRecord>,
    subgoal: Option<String>,
}

impl GlobalMemory {
    pub fn new(capacity: usize) -> Self {
        GlobalMemory { capacity, window: VecDeque::new(), failures: VecDeque::new(), subgoal: None }
    }

    pub fn push(&mut self, entry: GlobalEntry) {
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back(entry);
    }

    pub fn record_failure(&mut self, failure: FailureRecord) {
        if self.failures.len() == self.capacity {
            self.failures.pop_front();
        }
        self.failures.push_back(failure);
    }

    pub fn set_subgoal(&mut self, subgoal: &str) {
        self.subgoal = Some(subgoal.to_string());
    }

    pub fn subgoal(&self) -> Option<&str> {
        self.subgoal.as_deref()
    }

    pub fn entries(&self) -> Vec<GlobalEntry> {
        self.window.iter().cloned().collect()
    }

    pub fn failures(&self) -> Vec<FailureRecord> {
        self.failures.iter().cloned().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty() && self.failures.is_empty() && self.subgoal.is_none()
    }

    /// Drop all short-term context.
    pub fn flush(&mut self) {
        self.window.clear();
        self.failures.clear();
        self.subgoal = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_keeps_last_entries() {
        let mut m = GlobalMemory::new(5);
        for step in 1..=7 {
            m.push(GlobalEntry { step, digest: String::new(), action: ActionId::new("wait"), feedback: String::new() });
        }
        let steps: Vec<_> = m.entries().iter().map(|e| e.step).collect();
        assert_eq!(steps, [3, 4, 5, 6, 7]);
        m.set_subgoal("g");
        m.flush();
        assert!(m.is_empty());
    }
}
