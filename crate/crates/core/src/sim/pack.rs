//! Scenario files shipped with the crate.

use super::Scenario;
use crate::error::{Error, Result};
use crate::runtime::ledger::Difficulty;

const STANDARD: [(&str, &str); 7] = [
    ("clean", include_str!("../../scenarios/clean.json")),
    ("scene-change", include_str!("../../scenarios/scene_change.json")),
    ("stall", include_str!("../../scenarios/stall.json")),
    ("repetition-trap", include_str!("../../scenarios/repetition_trap.json")),
    ("hard-failure", include_str!("../../scenarios/hard_failure.json")),
    ("twelve-step", include_str!("../../scenarios/twelve_step.json")),
    ("warehouse", include_str!("../../scenarios/warehouse.json")),
];

const PROBES: [(&str, &str); 4] = [
    ("serpentine", include_str!("../../scenarios/serpentine.json")),
    ("walled-easy", include_str!("../../scenarios/walled_easy.json")),
    ("walled-medium", include_str!("../../scenarios/walled_medium.json")),
    ("walled-hard", include_str!("../../scenarios/walled_hard.json")),
];

/// Names of the standard pack, in run order.
pub fn names() -> Vec<&'static str> {
    STANDARD.iter().map(|(n, _)| *n).collect()
}

/// Every built-in name, including the budget probes.
pub fn all_names() -> Vec<&'static str> {
    STANDARD.iter().chain(PROBES.iter()).map(|(n, _)| *n).collect()
}

pub fn get(name: &str) -> Result<Scenario> {
    let (_, text) = STANDARD
        .iter()
        .chain(PROBES.iter())
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::NotFound(format!("built-in scenario {name:?}")))?;
    Scenario::from_json(text)
}

/// The clean baseline, one scenario per event kind, and larger layouts.
/// Every standard scenario is solvable within its step cap.
pub fn standard() -> Vec<Scenario> {
    STANDARD.iter().map(|(_, text)| Scenario::from_json(text).expect("built-in scenario parses")).collect()
}

/// A goal sealed behind walls at the given difficulty; episodes end only by cap or budget.
pub fn walled(difficulty: Difficulty) -> Scenario {
    let name = format!("walled-{difficulty}");
    get(&name).expect("built-in scenario parses")
}
