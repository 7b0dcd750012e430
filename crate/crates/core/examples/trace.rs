use deliberate::harness::{run_scripted, AgentProfile, DEFAULT_SEED};
use deliberate::runtime::{BudgetMode, LoopConfig};
use deliberate::sim::pack;

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "clean".into());
    let scenario = pack::get(&name).expect("scenario");
    let log =
        run_scripted(&scenario, &LoopConfig::default(), BudgetMode::StepCapped, AgentProfile::Triggered, DEFAULT_SEED, 0).expect("run");
    for s in &log.steps {
        println!(
            "t={:>3} c={} d={:.3} z={} r={} l={:?} g={} clauses={:?} reasons={:?} {:?} {} lvl={:?} calls={}",
            s.step,
            s.signals.since_strategic,
            s.signals.visual_change,
            s.signals.zero_progress,
            s.signals.repetition,
            s.signals.failure_level,
            s.g as u8,
            s.clauses,
            s.trigger_reasons,
            s.decision,
            s.action,
            s.outcome_level,
            s.ledger_delta.calls
        );
    }
    println!("{:?} after {} steps, {:?}", log.end.status, log.end.steps, log.end.ledger);
}
