//! `deliberate`: run scripted episodes, sweep trigger thresholds, report metrics.
//!
//! Exit status is 0 when every episode succeeds, 1 when some episode failed
//! and 2 for configuration or input errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use deliberate::harness::AgentProfile;
use deliberate::runtime::BudgetMode;
use deliberate::sim::pack;
use deliberate::trigger::{ThresholdConfig, NAMED_SETTINGS};

use crate::commands::Verdict;
use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "deliberate", version, about = "Event-triggered deliberation on a scripted gridworld")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios and write one JSONL log per episode plus a summary.
    Run(RunArgs),
    /// Run the same episodes under several threshold settings.
    Sweep {
        #[command(flatten)]
        args: RunArgs,
        /// Named settings or TOML files of threshold fields.
        #[arg(long, value_delimiter = ',', default_values_t = NAMED_SETTINGS.map(String::from))]
        settings: Vec<String>,
    },
    /// Aggregate a directory of episode logs into report.csv and report.json.
    Report {
        dir: PathBuf,
        /// Where to write the report; defaults to the log directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the visual descriptor of a PNG, or its distance to a second image.
    Describe {
        image: PathBuf,
        against: Option<PathBuf>,
        /// Write the 1024 comma-separated values here instead of stdout.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// List built-in scenarios.
    Scenarios,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config with [run] and [loop] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario file or built-in name; repeatable. Defaults to the standard pack.
    #[arg(long = "scenario")]
    scenarios: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    mode: Option<BudgetMode>,
    #[arg(long)]
    profile: Option<AgentProfile>,
    #[arg(long)]
    repeat: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Named threshold setting to use instead of the configured thresholds.
    #[arg(long)]
    setting: Option<String>,
    /// Share memories across episodes, loading and saving them here.
    #[arg(long)]
    memory_dir: Option<PathBuf>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

impl RunArgs {
    fn effective(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        let run = &mut cfg.run;
        if !self.scenarios.is_empty() {
            run.scenarios = self.scenarios.clone();
        }
        run.seed = self.seed.unwrap_or(run.seed);
        run.workers = self.workers.unwrap_or(run.workers);
        run.mode = self.mode.unwrap_or(run.mode);
        run.profile = self.profile.unwrap_or(run.profile);
        run.repeat = self.repeat.unwrap_or(run.repeat);
        if let Some(out) = &self.out {
            run.out = out.clone();
        }
        if let Some(dir) = &self.memory_dir {
            run.memory_dir = Some(dir.clone());
        }
        if let Some(name) = &self.setting {
            cfg.control.thresholds = ThresholdConfig::named(name)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn dispatch(command: Command) -> Result<Verdict> {
    match command {
        Command::Run(args) => {
            let cfg = args.effective()?;
            if args.print_config {
                print!("{}", cfg.to_toml());
                return Ok(Verdict::AllSucceeded);
            }
            commands::run(&cfg)
        }
        Command::Sweep { args, settings } => {
            let cfg = args.effective()?;
            if args.print_config {
                print!("{}", cfg.to_toml());
                return Ok(Verdict::AllSucceeded);
            }
            commands::sweep(&cfg, &settings)
        }
        Command::Report { dir, out } => commands::report(&dir, out.as_deref()).map(|()| Verdict::AllSucceeded),
        Command::Describe { image, against, dump } => {
            commands::describe(&image, against.as_deref(), dump.as_deref()).map(|()| Verdict::AllSucceeded)
        }
        Command::Scenarios => {
            for name in pack::all_names() {
                let s = pack::get(name)?;
                println!("{name:<16} {:<7} {}", s.difficulty().to_string(), s.description);
            }
            Ok(Verdict::AllSucceeded)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(Verdict::AllSucceeded) => ExitCode::SUCCESS,
        Ok(Verdict::EpisodeFailures(n)) => {
            eprintln!("{n} episode(s) did not succeed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
