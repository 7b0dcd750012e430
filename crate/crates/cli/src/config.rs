//! Effective run configuration: defaults, then the config file, then
//! environment overrides, then command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use deliberate::harness::{AgentProfile, DEFAULT_SEED};
use deliberate::runtime::{BudgetMode, LoopConfig};
use serde::{Deserialize, Serialize};

pub const SEED_VAR: &str = "DELIBERATE_SEED";
pub const OUT_VAR: &str = "DELIBERATE_OUT";
pub const DEFAULT_WORKERS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Scenario files or built-in pack names; empty means the standard pack.
    pub scenarios: Vec<String>,
    pub mode: BudgetMode,
    pub profile: AgentProfile,
    pub seed: u64,
    pub repeat: u32,
    pub workers: usize,
    pub out: PathBuf,
    /// Directory holding `bank.jsonl`, `nodes.jsonl` and `edges.jsonl`.
    /// When set, episodes share one memory and run sequentially.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_dir: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            scenarios: Vec::new(),
            mode: BudgetMode::StepCapped,
            profile: AgentProfile::Triggered,
            seed: DEFAULT_SEED,
            repeat: 1,
            workers: DEFAULT_WORKERS,
            out: PathBuf::from("runs"),
            memory_dir: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    #[serde(rename = "loop")]
    pub control: LoopConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Applies seed and output-directory overrides from the environment.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(seed) = var(SEED_VAR) {
            self.run.seed = seed.trim().parse().with_context(|| format!("{SEED_VAR}={seed:?} is not an unsigned integer"))?;
        }
        if let Some(out) = var(OUT_VAR) {
            self.run.out = PathBuf::from(out);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.control.validate()?;
        if self.run.repeat == 0 {
            bail!("repeat must be at least 1");
        }
        if self.run.workers == 0 {
            bail!("workers must be at least 1");
        }
        Ok(())
    }
}
