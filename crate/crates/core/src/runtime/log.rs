//! Episode logs: one JSONL file per episode with a header, one record per
//! environment step and a terminal record.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::gate::GateDecision;
use super::ledger::{BudgetMode, CallKind, Difficulty, LedgerTotals};
use super::recovery::RecoveryDirective;
use crate::action::ActionId;
use crate::controllers::{DecisionKind, OverrideCategory, Proposal, Violation};
use crate::error::{Error, Result};
use crate::fusion::FusedAction;
use crate::trigger::{FailureLevel, RunnerFeedback, ThresholdConfig, TriggerSignals};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    Success,
    StepCap,
    BudgetExhausted,
    EnvFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub scenario: String,
    pub difficulty: Difficulty,
    pub mode: BudgetMode,
    pub seed: u64,
    pub run_index: u32,
    pub config_hash: String,
    pub step_cap: u32,
    pub budget: Option<u64>,
    pub thresholds: ThresholdConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u32,
    pub state: String,
    pub observation: String,
    /// Signals the trigger evaluated at this step.
    pub signals: TriggerSignals,
    pub clauses: Vec<String>,
    pub predicate: bool,
    pub g: bool,
    pub trigger_reasons: Vec<String>,
    pub directive: RecoveryDirective,
    /// Global-memory entries available when the step began.
    pub memory_window: usize,
    pub strategic_invoked: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal: Option<Proposal>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fused: Vec<FusedAction>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hints: Vec<String>,
    pub decision: DecisionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub override_category: Option<OverrideCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violation: Option<Violation>,
    pub format_retry: bool,
    pub action: ActionId,
    pub feedback: RunnerFeedback,
    pub outcome_level: FailureLevel,
    pub stuck: bool,
    pub next_state: String,
    pub gate: GateDecision,
    pub ledger_delta: LedgerTotals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEnd {
    pub status: EpisodeStatus,
    pub steps: u32,
    pub ledger: LedgerTotals,
    pub calls_by_kind: BTreeMap<CallKind, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogLine {
    Header(LogHeader),
    Step(Box<StepRecord>),
    End(EpisodeEnd),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub header: LogHeader,
    pub steps: Vec<StepRecord>,
    pub end: EpisodeEnd,
}

impl EpisodeLog {
    pub fn status(&self) -> EpisodeStatus {
        self.end.status
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, &LogLine::Header(self.header.clone()))?;
        out.write_all(b"\n")?;
        for s in &self.steps {
            serde_json::to_writer(&mut out, &LogLine::Step(Box::new(s.clone())))?;
            out.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut out, &LogLine::End(self.end.clone()))?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_jsonl(&mut out)?;
        out.flush()?;
        Ok(())
    }

    /// Parse a log; `source` names the input in error messages.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse { path: source.to_string(), line, message };
        let (mut header, mut steps, mut end) = (None, Vec::new(), None);
        let mut last = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            last = line;
            if raw.trim().is_empty() {
                continue;
            }
            if end.is_some() {
                return Err(err(line, "record after end of episode".into()));
            }
            match serde_json::from_str::<LogLine>(raw).map_err(|e| err(line, e.to_string()))? {
                LogLine::Header(h) if header.is_none() && steps.is_empty() => header = Some(h),
                LogLine::Header(_) => return Err(err(line, "unexpected header".into())),
                LogLine::Step(_) if header.is_none() => return Err(err(line, "step before header".into())),
                LogLine::Step(s) => steps.push(*s),
                LogLine::End(e) => end = Some(e),
            }
        }
        let header = header.ok_or_else(|| err(1, "missing header".into()))?;
        let end = end.ok_or_else(|| err(last, "missing end record".into()))?;
        if end.steps as usize != steps.len() {
            return Err(err(last, format!("end record counts {} steps, found {}", end.steps, steps.len())));
        }
        Ok(EpisodeLog { header, steps, end })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }
}
