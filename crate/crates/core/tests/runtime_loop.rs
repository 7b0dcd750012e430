use deliberate::controllers::{
    ControlError, Proposal, ReactiveController, ReactiveDecision, ReactiveInput, StrategicContext, StrategicController,
};
use deliberate::harness::{run_scripted, AgentProfile, DEFAULT_SEED};
use deliberate::runtime::{
    run_episode, BudgetLedger, BudgetMode, CallKind, Difficulty, EpisodeMeta, EpisodeStatus, LoopConfig, Memories, Role,
};
use deliberate::sim::{pack, EnvError, EnvStep, Environment, Scenario};
use deliberate::trigger::{RunnerFeedback, ThresholdConfig};
use deliberate::visual::Frame;
use deliberate::ActionId;

/// Counter world: every `tick` is productive; success after `goal` ticks.
struct TickWorld {
    ticks: u32,
    goal: u32,
}

impl TickWorld {
    fn observe(&self) -> EnvStep {
        EnvStep {
            frame: Frame::gray(4, 4, (0..16).map(|i| (i * 13) as u8).collect()).unwrap(),
            ui_text: format!("tick {}", self.ticks),
            feedback: RunnerFeedback { productive_execution_confirmed: true, ..Default::default() },
        }
    }
}

impl Environment for TickWorld {
    type View = u32;

    fn reset(&mut self) -> Result<EnvStep, EnvError> {
        self.ticks = 0;
        Ok(self.observe())
    }

    fn step(&mut self, _action: &ActionId) -> Result<EnvStep, EnvError> {
        self.ticks += 1;
        Ok(self.observe())
    }

    fn view(&self) -> u32 {
        self.ticks
    }

    fn valid_actions(&self) -> Vec<ActionId> {
        vec![ActionId::new("tick"), ActionId::new("wait")]
    }

    fn is_success(&self) -> bool {
        self.ticks >= self.goal
    }

    fn state_summary(&self) -> String {
        format!("tick {}", self.ticks)
    }

    fn task(&self) -> String {
        format!("tick {} times", self.goal)
    }

    fn difficulty(&self) -> Difficulty {
        Difficulty::Hard
    }
}

/// One charged call per plan, proposing `tick` up to the horizon.
struct OneCallPlanner;

impl StrategicController<u32> for OneCallPlanner {
    fn plan(&mut self, ctx: &StrategicContext, _view: &u32, ledger: &mut BudgetLedger) -> Result<Proposal, ControlError> {
        ledger.account_call(Role::Strategic, CallKind::TaskReasoning, 10, 10)?;
        let len = ctx.horizon.unwrap_or(12) as usize;
        Ok(Proposal::new("tick", vec![ActionId::new("tick"); len], "done", ctx.step, "steady", len).unwrap())
    }
}

struct Follower;

impl ReactiveController<u32> for Follower {
    fn act(&mut self, input: &ReactiveInput<'_>, _view: &u32, ledger: &mut BudgetLedger) -> Result<ReactiveDecision, ControlError> {
        ledger.account_call(Role::Reactive, CallKind::ActionProposal, 5, 5)?;
        Ok(match input.proposal.planned_actions.get(input.cursor) {
            Some(a) => ReactiveDecision::follow(a.clone()),
            None => ReactiveDecision::escalate(),
        })
    }
}

fn tick_episode(goal: u32, mode: BudgetMode) -> deliberate::runtime::EpisodeLog {
    let cfg = LoopConfig::default();
    let mut env = TickWorld { ticks: 0, goal };
    let mut memories = Memories::new(&cfg);
    let mut ledger = BudgetLedger::for_mode(mode, Difficulty::Hard);
    let meta = EpisodeMeta { scenario: "tick".into(), seed: DEFAULT_SEED, run_index: 0, config_hash: "test".into() };
    run_episode(&mut env, &cfg, mode, &meta, &mut OneCallPlanner, &mut Follower, &mut memories, &mut ledger)
}

#[test]
fn periodic_refresh_alone_gives_quarter_call_rate() {
    let log = tick_episode(100, BudgetMode::StepCapped);
    assert_eq!(log.status(), EpisodeStatus::Success);
    assert_eq!(log.end.steps, 100);
    let rate = log.end.ledger.strategic_calls as f64 / f64::from(log.end.steps);
    assert!((rate - 0.25).abs() < 0.02, "rate {rate}");
    // Refreshes land every fourth step starting from the first.
    let planned: Vec<u32> = log.steps.iter().filter(|s| s.strategic_invoked).map(|s| s.step).collect();
    assert_eq!(planned, (0..25).map(|i| 1 + 4 * i).collect::<Vec<_>>());
}

#[test]
fn success_on_first_step_ends_episode() {
    let log = tick_episode(1, BudgetMode::StepCapped);
    assert_eq!(log.status(), EpisodeStatus::Success);
    assert_eq!(log.steps.len(), 1);
}

#[test]
fn escalation_equals_strategic_charge() {
    for scenario in pack::standard() {
        let log =
            run_scripted(&scenario, &LoopConfig::default(), BudgetMode::StepCapped, AgentProfile::Triggered, DEFAULT_SEED, 0).unwrap();
        for s in &log.steps {
            assert_eq!(s.g, s.ledger_delta.strategic_calls > 0, "{} step {}", scenario.name, s.step);
            assert_eq!(s.g, s.strategic_invoked);
        }
    }
}

#[test]
fn counter_restarts_after_strategic_step() {
    let log = run_scripted(
        &pack::get("twelve-step").unwrap(),
        &LoopConfig::default(),
        BudgetMode::StepCapped,
        AgentProfile::Triggered,
        DEFAULT_SEED,
        0,
    )
    .unwrap();
    for pair in log.steps.windows(2) {
        if pair[0].strategic_invoked {
            assert_eq!(pair[1].signals.since_strategic, 1, "step {}", pair[1].step);
        }
    }
}

#[test]
fn ledger_never_exceeds_budget() {
    let mut all = pack::standard();
    all.extend(Difficulty::ALL.map(pack::walled));
    for scenario in &all {
        for profile in [AgentProfile::Triggered, AgentProfile::FourCallsPerStep, AgentProfile::OneCallPerStep] {
            let log = run_scripted(scenario, &LoopConfig::default(), BudgetMode::CallBudgeted, profile, DEFAULT_SEED, 0).unwrap();
            let budget = log.header.budget.unwrap();
            assert!(log.end.ledger.calls <= budget, "{} {profile:?}", scenario.name);
            let summed: u64 = log.steps.iter().map(|s| s.ledger_delta.calls).sum();
            assert!(summed <= log.end.ledger.calls);
        }
    }
}

#[test]
fn one_call_agent_stretches_budget() {
    let log = run_scripted(
        &pack::walled(Difficulty::Easy),
        &LoopConfig::default(),
        BudgetMode::CallBudgeted,
        AgentProfile::OneCallPerStep,
        DEFAULT_SEED,
        0,
    )
    .unwrap();
    assert_eq!(log.status(), EpisodeStatus::BudgetExhausted);
    assert!(log.end.steps <= 120);
    assert!(log.end.steps > 30);
}

#[test]
fn stall_escalates_once() {
    let cfg = LoopConfig { thresholds: ThresholdConfig::no_periodic_refresh(), ..LoopConfig::default() };
    let log = run_scripted(&pack::get("stall").unwrap(), &cfg, BudgetMode::StepCapped, AgentProfile::Triggered, DEFAULT_SEED, 0).unwrap();
    let stalled: Vec<u32> = log.steps.iter().filter(|s| s.clauses.iter().any(|c| c == "stall")).map(|s| s.step).collect();
    assert_eq!(stalled.len(), 1, "{stalled:?}");
    assert_eq!(log.status(), EpisodeStatus::Success);
}

#[test]
fn episode_start_always_plans() {
    let scenario: Scenario = pack::get("clean").unwrap();
    let log = run_scripted(&scenario, &LoopConfig::default(), BudgetMode::StepCapped, AgentProfile::Triggered, DEFAULT_SEED, 0).unwrap();
    let first = &log.steps[0];
    assert!(first.g && first.trigger_reasons.iter().any(|r| r == "episode_start"));
}

#[test]
fn format_retry_is_charged_separately() {
    let log = run_scripted(
        &pack::get("hard-failure").unwrap(),
        &LoopConfig::default(),
        BudgetMode::StepCapped,
        AgentProfile::Triggered,
        DEFAULT_SEED,
        0,
    )
    .unwrap();
    let retries = log.end.calls_by_kind.get(&CallKind::FormatRetry).copied().unwrap_or(0);
    assert_eq!(retries, log.steps.iter().filter(|s| s.format_retry).count() as u64);
}
