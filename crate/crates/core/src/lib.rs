//! Event-triggered deliberation runtime.
//!
//! A cheap reactive controller executes every step; an expensive strategic
//! controller is only invoked when a fixed event predicate fires (periodic
//! refresh, visual discontinuity, stalled progress, behavioural repetition or
//! graded execution failure). Two memories feed the controllers: a flat
//! state-action bank for local hints and a knowledge graph of validated
//! transitions for replanning evidence. Every large-model call is charged to a
//! [`runtime::BudgetLedger`], and [`metrics`] turns episode logs into stuck /
//! recovery statistics and budgeted success rates.
//!
//! The [`sim`] module ships a deterministic gridworld with scripted failure
//! injection so the whole loop runs without any language model.

pub mod action;
pub mod controllers;
pub mod error;
pub mod fusion;
pub mod harness;
pub mod metrics;
pub mod runtime;
pub mod sakg;
pub mod samb;
pub mod sim;
pub mod text;
pub mod time;
pub mod trigger;
pub mod visual;

pub use action::ActionId;
pub use error::{Error, Result};
