//! Deterministic stand-ins for model-driven controllers in the gridworld.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    ControlError, OverrideCategory, Proposal, ReactiveController, ReactiveDecision, ReactiveInput, StrategicContext, StrategicController,
};
use crate::action::ActionId;
use crate::runtime::ledger::{estimate_tokens, BudgetLedger, CallKind, Role};
use crate::sim::{Dir, GridView, Pos};

/// Proposal length used when the refresh interval is unbounded.
pub const UNBOUNDED_HORIZON: u32 = 12;
/// Cap on hint text the reactive controller reads per step.
pub const HINT_CHAR_CAP: usize = 4096;

const REFLECT_ON: [&str; 5] = ["failure", "repetition", "stall", "context_flush", "reactive_escalation"];

/// How a strategic invocation is charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategicCost {
    /// One call per workflow stage that runs (three, or four with reflection).
    Staged,
    /// A fixed number of calls per invocation, regardless of stages.
    Flat(u32),
}

/// Shortest-path planner that runs collect, reflect, reason and propose as
/// separate charged phases.
#[derive(Debug, Clone)]
pub struct ScriptedStrategic {
    cost: StrategicCost,
    reflection: bool,
    rng: ChaCha8Rng,
    last_dir: Option<Dir>,
}

impl ScriptedStrategic {
    pub fn new(seed: u64) -> Self {
        ScriptedStrategic { cost: StrategicCost::Staged, reflection: true, rng: ChaCha8Rng::seed_from_u64(seed), last_dir: None }
    }

    pub fn with_cost(mut self, cost: StrategicCost) -> Self {
        self.cost = cost;
        self
    }

    pub fn without_reflection(mut self) -> Self {
        self.reflection = false;
        self
    }

    fn charge(&self, ledger: &mut BudgetLedger, kind: CallKind, tokens_in: u64, tokens_out: u64) -> Result<(), ControlError> {
        if self.cost == StrategicCost::Staged {
            ledger.account_call(Role::Strategic, kind, tokens_in, tokens_out)?;
        }
        Ok(())
    }

    fn charge_flat(&self, ledger: &mut BudgetLedger, tokens_in: u64) -> Result<(), ControlError> {
        if let StrategicCost::Flat(n) = self.cost {
            for _ in 0..n {
                ledger.account_call(Role::Strategic, CallKind::ActionProposal, tokens_in, 16)?;
            }
        }
        Ok(())
    }

    /// Breadth-first distances to the goal over free cells.
    fn distances(view: &GridView) -> Vec<Option<usize>> {
        let mut dist = vec![None; view.width * view.height];
        let idx = |p: Pos| p.y * view.width + p.x;
        let mut queue = VecDeque::from([view.target]);
        dist[idx(view.target)] = Some(0);
        while let Some(p) = queue.pop_front() {
            let d = dist[idx(p)].unwrap_or(0);
            for dir in Dir::ALL {
                if let Some(n) = view.step_to(p, dir) {
                    if dist[idx(n)].is_none() {
                        dist[idx(n)] = Some(d + 1);
                        queue.push_back(n);
                    }
                }
            }
        }
        dist
    }

    fn route(&mut self, view: &GridView, avoid: &BTreeSet<ActionId>, evidence: &[(ActionId, f64)], limit: usize) -> Option<Vec<Dir>> {
        let dist = Self::distances(view);
        let at = |p: Pos| dist[p.y * view.width + p.x];
        at(view.agent)?;
        let mut pos = view.agent;
        let mut prev = self.last_dir;
        let mut dirs = Vec::new();
        while pos != view.target && dirs.len() < limit {
            let options: Vec<(Dir, Pos, usize)> =
                Dir::ALL.into_iter().filter_map(|d| view.step_to(pos, d).and_then(|n| at(n).map(|k| (d, n, k)))).collect();
            let first = dirs.is_empty();
            let allowed: Vec<_> = if first {
                let kept: Vec<_> = options.iter().copied().filter(|(d, _, _)| !avoid.contains(&d.move_action())).collect();
                if kept.is_empty() {
                    options
                } else {
                    kept
                }
            } else {
                options
            };
            let best = allowed.iter().map(|o| o.2).min()?;
            let mut ties: Vec<_> = allowed.into_iter().filter(|o| o.2 == best).collect();
            if ties.len() > 1 && first {
                let score = |d: Dir| evidence.iter().find(|(a, _)| *a == d.move_action()).map_or(f64::NEG_INFINITY, |e| e.1);
                let top = ties.iter().map(|o| score(o.0)).fold(f64::NEG_INFINITY, f64::max);
                ties.retain(|o| score(o.0) == top);
            }
            if ties.len() > 1 {
                if let Some(p) = prev.filter(|p| ties.iter().any(|o| o.0 == *p)) {
                    ties.retain(|o| o.0 == p);
                }
            }
            let (dir, next, _) = ties[self.rng.random_range(0..ties.len())];
            dirs.push(dir);
            prev = Some(dir);
            pos = next;
        }
        Some(dirs)
    }
}

impl StrategicController<GridView> for ScriptedStrategic {
    fn plan(&mut self, ctx: &StrategicContext, view: &GridView, ledger: &mut BudgetLedger) -> Result<Proposal, ControlError> {
        if ctx.valid_actions.is_empty() {
            return Err(ControlError::InvalidContext("empty valid action set".into()));
        }
        let window: String = ctx.global_window.iter().map(|e| format!("{} {} {}\n", e.digest, e.action, e.feedback)).collect();
        let collected = estimate_tokens(&ctx.observation) + estimate_tokens(&window);
        self.charge_flat(ledger, collected + estimate_tokens(&ctx.task))?;

        // Information collection.
        self.charge(ledger, CallKind::Summarization, collected, 24)?;

        // Self reflection on failure-like triggers: failed actions taken from
        // this very state become negative evidence for the first move.
        let reflect = self.reflection && ctx.trigger_reasons.iter().any(|r| REFLECT_ON.contains(&r.as_str()));
        let mut avoid = BTreeSet::new();
        if reflect {
            let trace: String = ctx.failure_trace.iter().map(|f| format!("{} {} {}\n", f.state, f.action, f.message)).collect();
            self.charge(ledger, CallKind::Reflection, estimate_tokens(&trace) + 16, 32)?;
            avoid.extend(ctx.failure_trace.iter().filter(|f| f.state == ctx.state).map(|f| f.action.clone()));
        }

        // Task reasoning.
        self.charge(ledger, CallKind::TaskReasoning, estimate_tokens(&ctx.task) + estimate_tokens(&ctx.state), 32)?;
        let horizon = ctx.horizon.unwrap_or(UNBOUNDED_HORIZON) as usize;
        let mut actions = Vec::new();
        if !view.tool_ready() {
            if let Some(tool) = &view.required_tool {
                actions.push(ActionId::new(format!("select:{tool}")));
            }
        }
        let evidence: Vec<(ActionId, f64)> = ctx.evidence.iter().map(|f| (f.action.clone(), f.fused)).collect();
        let route = self.route(view, &avoid, &evidence, horizon.saturating_sub(actions.len()));
        let (subgoal, stop) = match &route {
            Some(_) => (
                format!("reach goal tile {} {}", view.target.x, view.target.y),
                format!("agent stands on {} {}", view.target.x, view.target.y),
            ),
            None => ("hold position until the goal becomes reachable".to_string(), "a route to the goal opens".to_string()),
        };
        let dirs = route.unwrap_or_default();
        if let Some(d) = dirs.last() {
            self.last_dir = Some(*d);
        }
        actions.extend(dirs.into_iter().map(Dir::move_action));
        if actions.is_empty() {
            actions.push(ActionId::new("wait"));
        }
        actions.truncate(horizon.max(1));
        actions.retain(|a| ctx.valid_actions.contains(a));
        if actions.is_empty() {
            actions.push(ctx.valid_actions[0].clone());
        }

        // Action proposal.
        let listed: String = ctx.evidence.iter().map(|f| format!("{} {:.3}\n", f.action, f.fused)).collect();
        self.charge(
            ledger,
            CallKind::ActionProposal,
            estimate_tokens(&listed) + 8 * ctx.valid_actions.len() as u64,
            8 * actions.len() as u64,
        )?;
        let rationale = if reflect {
            format!("replanned after {}; avoiding {} failed action(s)", ctx.trigger_reasons.join(", "), avoid.len())
        } else {
            format!("triggered by {}", ctx.trigger_reasons.join(", "))
        };
        Proposal::new(subgoal, actions, stop, ctx.step, rationale, horizon.max(1)).map_err(|e| ControlError::InvalidContext(e.to_string()))
    }
}

/// Follows the active proposal, applying exact precondition checks before
/// each planned action.
#[derive(Debug, Clone)]
pub struct ScriptedReactive {
    calls_per_step: u32,
}

impl Default for ScriptedReactive {
    fn default() -> Self {
        ScriptedReactive { calls_per_step: 1 }
    }
}

impl ScriptedReactive {
    pub fn new(calls_per_step: u32) -> Self {
        ScriptedReactive { calls_per_step }
    }

    fn decide(input: &ReactiveInput<'_>, view: &GridView) -> ReactiveDecision {
        if input.local_retry {
            if let Some(failed) = input.last_failed {
                if input.proposal.planned_actions[input.cursor..].first() == Some(failed) && grounded(failed, view) {
                    return ReactiveDecision::follow(failed.clone());
                }
            }
        }
        let Some(planned) = input.proposal.planned_actions.get(input.cursor) else {
            return ReactiveDecision::escalate();
        };
        let (name, arg) = (planned.name(), planned.argument());
        match (name, arg.and_then(Dir::parse)) {
            ("move", Some(dir)) => match view.step_to(view.agent, dir) {
                Some(next) if next == view.target && !view.tool_ready() => {
                    let tool = view.required_tool.clone().unwrap_or_default();
                    ReactiveDecision::correct(OverrideCategory::ToolReselection, ActionId::new(format!("select:{tool}")))
                }
                Some(_) => ReactiveDecision::follow(planned.clone()),
                None => Self::detour(dir, view, input.hints),
            },
            ("select", _) => {
                let tool = arg.unwrap_or_default();
                if view.tools.iter().any(|t| t == tool) {
                    ReactiveDecision::follow(planned.clone())
                } else if let Some(req) = &view.required_tool {
                    ReactiveDecision::correct(OverrideCategory::ToolReselection, ActionId::new(format!("select:{req}")))
                } else {
                    ReactiveDecision::escalate()
                }
            }
            _ if grounded(planned, view) => ReactiveDecision::follow(planned.clone()),
            _ => ReactiveDecision::escalate(),
        }
    }

    /// Planned move is blocked: try a lateral step, then a step back.
    fn detour(dir: Dir, view: &GridView, hints: &[Hint]) -> ReactiveDecision {
        let mut lateral: Vec<Dir> = dir.lateral().into_iter().filter(|d| view.step_to(view.agent, *d).is_some()).collect();
        if let Some(pos) = lateral.iter().position(|d| hints.iter().any(|h| h.action_trace.first() == Some(&d.move_action()))) {
            lateral.swap(0, pos);
        }
        if let Some(d) = lateral.first() {
            return ReactiveDecision::correct(OverrideCategory::ObstacleAvoidance, d.move_action());
        }
        let back = dir.opposite();
        if view.step_to(view.agent, back).is_some() {
            return ReactiveDecision::correct(OverrideCategory::OneStepRepositioning, back.move_action());
        }
        ReactiveDecision::escalate()
    }
}

use crate::samb::Hint;

fn grounded(action: &ActionId, view: &GridView) -> bool {
    match (action.name(), action.argument()) {
        ("move", Some(d)) => Dir::parse(d).is_some_and(|d| view.step_to(view.agent, d).is_some()),
        ("face", Some(d)) => Dir::parse(d).is_some(),
        ("select", Some(t)) => view.tools.iter().any(|x| x == t),
        ("wait", None) => true,
        _ => false,
    }
}

impl ReactiveController<GridView> for ScriptedReactive {
    fn act(&mut self, input: &ReactiveInput<'_>, view: &GridView, ledger: &mut BudgetLedger) -> Result<ReactiveDecision, ControlError> {
        let mut hint_text = String::new();
        for h in input.hints {
            hint_text.push_str(&h.state_summary);
            for a in &h.action_trace {
                hint_text.push(' ');
                hint_text.push_str(a.as_str());
            }
            hint_text.push('\n');
        }
        let hint_chars = hint_text.chars().count().min(HINT_CHAR_CAP);
        let tokens_in = estimate_tokens(input.state) + (hint_chars as u64).div_ceil(4) + 16;
        if input.attempt == 0 {
            for _ in 0..self.calls_per_step {
                ledger.account_call(Role::Reactive, CallKind::ReactiveSelection, tokens_in, 8)?;
            }
        } else {
            ledger.account_call(Role::Reactive, CallKind::FormatRetry, tokens_in, 8)?;
        }
        let decision = Self::decide(input, view);
        Ok(match decision.action {
            Some(ref a) if !input.valid_actions.contains(a) => ReactiveDecision::escalate(),
            _ => decision,
        })
    }
}
