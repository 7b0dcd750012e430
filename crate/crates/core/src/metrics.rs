//! Evaluation quantities computed from episode logs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::runtime::{BudgetMode, Difficulty, EpisodeLog, EpisodeStatus};
use crate::trigger::FailureLevel;

/// Guard in the recovery-to-stuck ratio denominator.
pub const RATIO_EPSILON: f64 = 1e-9;
/// Steps after a stuck event within which normal execution counts as recovery.
pub const RECOVERY_WINDOW: usize = 3;
pub const NO_STUCK_EVENTS: &str = "no stuck events";

/// Recovery-to-stuck ratio; undefined when nothing got stuck.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Ratio {
    Value(f64),
    #[serde(with = "no_stuck")]
    NoStuckEvents,
}

mod no_stuck {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(super::NO_STUCK_EVENTS)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == super::NO_STUCK_EVENTS {
            Ok(())
        } else {
            Err(serde::de::Error::custom(format!("expected {:?}", super::NO_STUCK_EVENTS)))
        }
    }
}

impl Ratio {
    pub fn value(self) -> Option<f64> {
        match self {
            Ratio::Value(v) => Some(v),
            Ratio::NoStuckEvents => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryStats {
    pub n_step: u64,
    pub n_stuck: u64,
    pub n_recovered: u64,
    pub stuck_rate: f64,
    pub recovery_rate: f64,
    pub ratio: Ratio,
}

impl RecoveryStats {
    pub fn from_counts(n_step: u64, n_stuck: u64, n_recovered: u64) -> Result<Self> {
        if n_recovered > n_stuck || n_stuck > n_step {
            return Err(invalid(format!("need recovered <= stuck <= steps, got {n_recovered}, {n_stuck}, {n_step}")));
        }
        if n_step == 0 {
            return Err(invalid("no environment steps"));
        }
        let stuck_rate = n_stuck as f64 / n_step as f64;
        let recovery_rate = n_recovered as f64 / n_stuck.max(1) as f64;
        let ratio = if n_stuck == 0 { Ratio::NoStuckEvents } else { Ratio::Value(recovery_rate / stuck_rate.max(RATIO_EPSILON)) };
        Ok(RecoveryStats { n_step, n_stuck, n_recovered, stuck_rate, recovery_rate, ratio })
    }
}

/// Stuck and recovered counts within one episode.
pub fn episode_counts(log: &EpisodeLog) -> (u64, u64, u64) {
    let steps = &log.steps;
    let mut stuck = 0;
    let mut recovered = 0;
    for (i, s) in steps.iter().enumerate() {
        if !s.stuck {
            continue;
        }
        stuck += 1;
        let window = &steps[i + 1..steps.len().min(i + 1 + RECOVERY_WINDOW)];
        if window.iter().any(|n| !n.stuck && n.outcome_level == FailureLevel::Normal) {
            recovered += 1;
        }
    }
    (steps.len() as u64, stuck, recovered)
}

pub fn stuck_recovery(logs: &[EpisodeLog]) -> Result<RecoveryStats> {
    if logs.is_empty() {
        return Err(invalid("no episode logs"));
    }
    let (mut n, mut s, mut r) = (0, 0, 0);
    for log in logs {
        let (a, b, c) = episode_counts(log);
        n += a;
        s += b;
        r += c;
    }
    RecoveryStats::from_counts(n, s, r)
}

/// Terminal facts about one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub difficulty: Difficulty,
    pub mode: BudgetMode,
    pub status: EpisodeStatus,
    pub budget: Option<u64>,
}

impl From<&EpisodeLog> for EpisodeOutcome {
    fn from(log: &EpisodeLog) -> Self {
        EpisodeOutcome { difficulty: log.header.difficulty, mode: log.header.mode, status: log.end.status, budget: log.header.budget }
    }
}

fn success_fraction(outcomes: &[EpisodeOutcome], mode: BudgetMode) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(invalid("no episodes"));
    }
    if let Some(o) = outcomes.iter().find(|o| o.mode != mode) {
        return Err(invalid(format!("mixed modes: expected {mode}, found {}", o.mode)));
    }
    let wins = outcomes.iter().filter(|o| o.status == EpisodeStatus::Success).count();
    Ok(wins as f64 / outcomes.len() as f64)
}

/// Success rate under the per-difficulty call budget (four times the step cap).
pub fn budgeted_sr(outcomes: &[EpisodeOutcome]) -> Result<f64> {
    if let Some(o) = outcomes.iter().find(|o| o.mode == BudgetMode::CallBudgeted && o.budget != Some(o.difficulty.call_budget())) {
        return Err(invalid(format!("{} episode budget {:?} is not {}", o.difficulty, o.budget, o.difficulty.call_budget())));
    }
    success_fraction(outcomes, BudgetMode::CallBudgeted)
}

/// Success rate under the per-difficulty step cap.
pub fn success_rate(outcomes: &[EpisodeOutcome]) -> Result<f64> {
    success_fraction(outcomes, BudgetMode::StepCapped)
}

pub fn strategic_calls_per_step(logs: &[EpisodeLog]) -> Result<f64> {
    let steps: u64 = logs.iter().map(|l| l.steps.len() as u64).sum();
    if steps == 0 {
        return Err(invalid("no environment steps"));
    }
    let calls: u64 = logs.iter().map(|l| l.end.ledger.strategic_calls).sum();
    Ok(calls as f64 / steps as f64)
}

pub fn tokens_per_task(logs: &[EpisodeLog]) -> Result<f64> {
    if logs.is_empty() {
        return Err(invalid("no episode logs"));
    }
    let tokens: u64 = logs.iter().map(|l| l.end.ledger.tokens_in + l.end.ledger.tokens_out).sum();
    Ok(tokens as f64 / logs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mean: f64,
    /// Sample standard deviation; absent for a single run.
    pub std: Option<f64>,
    pub runs: usize,
}

pub fn aggregate_runs(values: &[f64]) -> Result<RunSummary> {
    let n = values.len();
    if n == 0 {
        return Err(invalid("no runs to aggregate"));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = (n >= 2).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
    Ok(RunSummary { mean, std, runs: n })
}

pub const METRIC_NAMES: [&str; 7] =
    ["SR", "Budgeted SR", "Tokens / Task", "Strategic calls / step", "Stuck Rate", "Recovery Rate", "Recovery/Stuck Ratio"];

/// Per-run values keyed by metric name; a metric is absent when it does not
/// apply to the run (for example Budgeted SR on step-capped logs).
pub fn run_metrics(logs: &[EpisodeLog]) -> Result<BTreeMap<&'static str, f64>> {
    let mut out = BTreeMap::new();
    let outcomes: Vec<EpisodeOutcome> = logs.iter().map(EpisodeOutcome::from).collect();
    let capped: Vec<_> = outcomes.iter().copied().filter(|o| o.mode == BudgetMode::StepCapped).collect();
    let budgeted: Vec<_> = outcomes.iter().copied().filter(|o| o.mode == BudgetMode::CallBudgeted).collect();
    if !capped.is_empty() {
        out.insert(METRIC_NAMES[0], success_rate(&capped)?);
    }
    if !budgeted.is_empty() {
        out.insert(METRIC_NAMES[1], budgeted_sr(&budgeted)?);
    }
    out.insert(METRIC_NAMES[2], tokens_per_task(logs)?);
    out.insert(METRIC_NAMES[3], strategic_calls_per_step(logs)?);
    let rec = stuck_recovery(logs)?;
    out.insert(METRIC_NAMES[4], rec.stuck_rate);
    out.insert(METRIC_NAMES[5], rec.recovery_rate);
    if let Some(r) = rec.ratio.value() {
        out.insert(METRIC_NAMES[6], r);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<RunSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Metrics aggregated over runs, grouped by the logs' run index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub runs: usize,
    pub episodes: usize,
    pub rows: Vec<MetricRow>,
    pub recovery: RecoveryStats,
}

pub fn build_report(logs: &[EpisodeLog]) -> Result<Report> {
    if logs.is_empty() {
        return Err(invalid("no episode logs"));
    }
    let mut by_run: BTreeMap<u32, Vec<EpisodeLog>> = BTreeMap::new();
    for log in logs {
        by_run.entry(log.header.run_index).or_default().push(log.clone());
    }
    let per_run: Vec<BTreeMap<&str, f64>> = by_run.values().map(|l| run_metrics(l)).collect::<Result<_>>()?;
    let rows = METRIC_NAMES
        .iter()
        .filter_map(|name| {
            let values: Vec<f64> = per_run.iter().filter_map(|m| m.get(name).copied()).collect();
            if values.is_empty() {
                let note = match *name {
                    "Recovery/Stuck Ratio" => NO_STUCK_EVENTS.to_string(),
                    _ => return None,
                };
                return Some(MetricRow { metric: name.to_string(), summary: None, note: Some(note) });
            }
            Some(MetricRow { metric: name.to_string(), summary: aggregate_runs(&values).ok(), note: None })
        })
        .collect();
    Ok(Report { runs: by_run.len(), episodes: logs.len(), rows, recovery: stuck_recovery(logs)? })
}

impl Report {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,mean,std,runs\n");
        for row in &self.rows {
            match (&row.summary, &row.note) {
                (Some(s), _) => {
                    let std = s.std.map(|v| format!("{v:.6}")).unwrap_or_default();
                    out.push_str(&format!("{},{:.6},{},{}\n", row.metric, s.mean, std, s.runs));
                }
                (None, note) => out.push_str(&format!("{},{},,{}\n", row.metric, note.as_deref().unwrap_or(""), self.runs)),
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 0.01
    }

    #[test]
    fn table_row_from_counts() {
        let s = RecoveryStats::from_counts(5875, 2115, 1227).unwrap();
        assert!(close(s.stuck_rate, 0.360));
        assert!(close(s.recovery_rate, 0.580));
        assert!(close(s.ratio.value().unwrap(), 1.61));
    }

    #[test]
    fn no_stuck_marker() {
        let s = RecoveryStats::from_counts(10, 0, 0).unwrap();
        assert_eq!(s.ratio, Ratio::NoStuckEvents);
        assert_eq!(serde_json::to_string(&s.ratio).unwrap(), "\"no stuck events\"");
        let back: Ratio = serde_json::from_str("\"no stuck events\"").unwrap();
        assert_eq!(back, Ratio::NoStuckEvents);
        assert_eq!(serde_json::from_str::<Ratio>("1.5").unwrap(), Ratio::Value(1.5));
    }

    #[test]
    fn all_stuck_all_recovered() {
        let s = RecoveryStats::from_counts(7, 7, 7).unwrap();
        assert_eq!((s.stuck_rate, s.recovery_rate, s.ratio), (1.0, 1.0, Ratio::Value(1.0)));
        assert!(RecoveryStats::from_counts(5, 6, 0).is_err());
    }

    #[test]
    fn aggregation() {
        let r = aggregate_runs(&[10.0, 12.0, 14.0]).unwrap();
        assert_eq!((r.mean, r.std), (12.0, Some(2.0)));
        assert_eq!(aggregate_runs(&[3.0]).unwrap().std, None);
        assert_eq!(aggregate_runs(&[4.0, 4.0]).unwrap().std, Some(0.0));
        assert!(aggregate_runs(&[]).is_err());
    }

    fn outcome(mode: BudgetMode, status: EpisodeStatus) -> EpisodeOutcome {
        let budget = (mode == BudgetMode::CallBudgeted).then_some(120);
        EpisodeOutcome { difficulty: Difficulty::Easy, mode, status, budget }
    }

    #[test]
    fn budgeted_success_fraction() {
        let mut v = vec![outcome(BudgetMode::CallBudgeted, EpisodeStatus::BudgetExhausted); 82];
        v.extend(vec![outcome(BudgetMode::CallBudgeted, EpisodeStatus::Success); 18]);
        assert!((budgeted_sr(&v).unwrap() - 0.18).abs() < 1e-12);
        assert_eq!(budgeted_sr(&v[..82]).unwrap(), 0.0);
        v.push(outcome(BudgetMode::StepCapped, EpisodeStatus::Success));
        assert!(budgeted_sr(&v).is_err());
        let mut odd = outcome(BudgetMode::CallBudgeted, EpisodeStatus::Success);
        odd.budget = Some(7);
        assert!(budgeted_sr(&[odd]).is_err());
    }
}
