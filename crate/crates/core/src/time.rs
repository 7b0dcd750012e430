use serde::{Deserialize, Serialize};

/// Seconds on the run clock. The runtime advances it by a fixed amount per step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn from_hours(hours: u64) -> Self {
        Timestamp(hours * 3600)
    }

    /// Hours elapsed since `earlier`, zero if `earlier` is in the future.
    pub fn hours_since(self, earlier: Timestamp) -> f64 {
        self.0.saturating_sub(earlier.0) as f64 / 3600.0
    }
}
