//! Deterministic gridworld used to exercise the control loop end to end.
//!
//! The world produces the failure modes the trigger must notice: abrupt
//! visual change, silent stalls, movement traps and execution errors.

mod grid;
pub mod pack;
mod render;
mod scenario;

pub use grid::{Dir, GridView, GridWorld, Pos};
pub use scenario::{EventKind, Scenario, ScriptedEvent};

use crate::action::ActionId;
use crate::runtime::ledger::Difficulty;
use crate::trigger::RunnerFeedback;
use crate::visual::Frame;

/// One observation: rendered frame, UI text and runner feedback for the last action.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub frame: Frame,
    pub ui_text: String,
    pub feedback: RunnerFeedback,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnvError {
    #[error("episode already finished")]
    Finished,
    #[error("environment failure: {0}")]
    Terminal(String),
}

/// What the control loop needs from an environment.
pub trait Environment {
    /// Structured snapshot handed to scripted controllers.
    type View;

    fn reset(&mut self) -> Result<EnvStep, EnvError>;
    fn step(&mut self, action: &ActionId) -> Result<EnvStep, EnvError>;
    fn view(&self) -> Self::View;
    fn valid_actions(&self) -> Vec<ActionId>;
    fn is_success(&self) -> bool;
    /// Text key used for memory storage and retrieval.
    fn state_summary(&self) -> String;
    fn task(&self) -> String;
    fn difficulty(&self) -> Difficulty;
}
