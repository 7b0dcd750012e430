use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use deliberate::harness::{run_scripted, run_scripted_with};
use deliberate::metrics::{build_report, run_metrics, Report};
use deliberate::runtime::{EpisodeLog, EpisodeStatus, LoopConfig, Memories};
use deliberate::sakg::{HashingEmbedder, KnowledgeGraph};
use deliberate::samb::StateActionBank;
use deliberate::sim::{pack, Scenario};
use deliberate::trigger::{RefreshInterval, ThresholdConfig};
use deliberate::visual::{encode, visual_distance, Descriptor, Frame};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;

/// Whether every episode reached its goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    AllSucceeded,
    EpisodeFailures(usize),
}

impl Verdict {
    fn of(logs: &[EpisodeLog]) -> Self {
        match logs.iter().filter(|l| l.status() != EpisodeStatus::Success).count() {
            0 => Verdict::AllSucceeded,
            n => Verdict::EpisodeFailures(n),
        }
    }
}

/// Loads each entry as a file when it exists, otherwise as a pack name.
pub fn resolve_scenarios(entries: &[String]) -> Result<Vec<Scenario>> {
    if entries.is_empty() {
        return Ok(pack::standard());
    }
    entries
        .iter()
        .map(|entry| {
            let path = Path::new(entry);
            if path.is_file() {
                return Scenario::load(path).with_context(|| format!("loading scenario {entry}"));
            }
            match entry.as_str() {
                "standard" => Err(anyhow!("use no --scenario flag for the standard pack")),
                name => pack::get(name)
                    .map_err(|_| anyhow!("scenario {name:?} is neither a file nor a built-in ({})", pack::all_names().join(", "))),
            }
        })
        .collect()
}

struct Job<'a> {
    scenario: &'a Scenario,
    run_index: u32,
    seed: u64,
}

fn jobs<'a>(cfg: &RunConfig, scenarios: &'a [Scenario]) -> Vec<Job<'a>> {
    (0..cfg.run.repeat)
        .flat_map(|r| scenarios.iter().map(move |s| (s, r)))
        .map(|(scenario, run_index)| Job { scenario, run_index, seed: cfg.run.seed + u64::from(run_index) })
        .collect()
}

struct MemoryPaths {
    bank: PathBuf,
    nodes: PathBuf,
    edges: PathBuf,
}

impl MemoryPaths {
    fn in_dir(dir: &Path) -> Self {
        MemoryPaths { bank: dir.join("bank.jsonl"), nodes: dir.join("nodes.jsonl"), edges: dir.join("edges.jsonl") }
    }

    fn load(&self, cfg: &LoopConfig) -> Result<Memories> {
        let mut memories = Memories::new(cfg);
        if self.bank.exists() {
            memories.bank = StateActionBank::load_jsonl(&self.bank, cfg.memory_bank)?;
        }
        if self.nodes.exists() && self.edges.exists() {
            let embedder = Arc::new(HashingEmbedder::default());
            memories.graph = KnowledgeGraph::load_jsonl(&self.nodes, &self.edges, cfg.knowledge_graph, embedder)?;
        }
        Ok(memories)
    }

    fn save(&self, memories: &Memories) -> Result<()> {
        memories.bank.save_jsonl(&self.bank)?;
        memories.graph.save_jsonl(&self.nodes, &self.edges)?;
        Ok(())
    }
}

fn execute(cfg: &RunConfig, scenarios: &[Scenario]) -> Result<Vec<EpisodeLog>> {
    let jobs = jobs(cfg, scenarios);
    let RunConfig { run, control } = cfg;
    if let Some(dir) = &run.memory_dir {
        fs::create_dir_all(dir)?;
        let paths = MemoryPaths::in_dir(dir);
        let mut memories = paths.load(control)?;
        let logs = jobs
            .iter()
            .map(|j| run_scripted_with(j.scenario, control, run.mode, run.profile, j.seed, j.run_index, &mut memories))
            .collect::<deliberate::Result<Vec<_>>>()?;
        paths.save(&memories)?;
        return Ok(logs);
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(run.workers).build()?;
    let logs = pool.install(|| {
        jobs.par_iter()
            .map(|j| run_scripted(j.scenario, control, run.mode, run.profile, j.seed, j.run_index))
            .collect::<deliberate::Result<Vec<_>>>()
    })?;
    Ok(logs)
}

fn write_logs(dir: &Path, logs: &[EpisodeLog]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for log in logs {
        let path = dir.join(format!("{}.run{}.jsonl", log.header.scenario, log.header.run_index));
        log.save(&path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn write_report(dir: &Path, stem: &str, report: &Report) -> Result<()> {
    fs::write(dir.join(format!("{stem}.json")), report.to_json())?;
    fs::write(dir.join(format!("{stem}.csv")), report.to_csv())?;
    Ok(())
}

fn episode_line(log: &EpisodeLog) -> String {
    let status = serde_json::to_value(log.status()).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
    format!(
        "{:<16} run {:<3} {:<16} steps {:>4}  calls {:>4}  strategic {:>3}",
        log.header.scenario, log.header.run_index, status, log.end.steps, log.end.ledger.calls, log.end.ledger.strategic_calls
    )
}

pub fn run(cfg: &RunConfig) -> Result<Verdict> {
    let scenarios = resolve_scenarios(&cfg.run.scenarios)?;
    let logs = execute(cfg, &scenarios)?;
    write_logs(&cfg.run.out, &logs)?;
    write_report(&cfg.run.out, "summary", &build_report(&logs)?)?;
    for log in &logs {
        println!("{}", episode_line(log));
    }
    println!("wrote {} logs to {}", logs.len(), cfg.run.out.display());
    Ok(Verdict::of(&logs))
}

/// A named threshold setting, or a TOML file holding threshold fields.
pub fn resolve_setting(entry: &str) -> Result<(String, ThresholdConfig)> {
    let path = Path::new(entry);
    if path.is_file() {
        let text = fs::read_to_string(path)?;
        let th: ThresholdConfig = toml::from_str(&text).with_context(|| format!("in setting file {entry}"))?;
        th.validate()?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| entry.to_string());
        return Ok((name, th));
    }
    let th = ThresholdConfig::named(entry).map_err(|e| anyhow!("{e}"))?;
    Ok((entry.to_string(), th))
}

#[derive(Debug, Serialize)]
struct SweepRow {
    setting: String,
    refresh_interval: RefreshInterval,
    history_window: usize,
    visual_threshold: f64,
    stall_threshold: u32,
    repetition_threshold: u32,
    repeat_stall_threshold: u32,
    episodes: usize,
    success_rate: Option<f64>,
    strategic_calls_per_step: Option<f64>,
    tokens_per_task: Option<f64>,
    stuck_rate: Option<f64>,
    recovery_rate: Option<f64>,
}

const SWEEP_HEADER: &str =
    "setting,T,W,tau_v,tau_z,tau_r,tau_rz,episodes,SR,strategic_calls_per_step,tokens_per_task,stuck_rate,recovery_rate";

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl SweepRow {
    fn csv(&self) -> String {
        let t = match self.refresh_interval {
            RefreshInterval::Steps(n) => n.to_string(),
            RefreshInterval::Unbounded => "unbounded".into(),
        };
        format!(
            "{},{t},{},{},{},{},{},{},{},{},{},{},{}",
            self.setting,
            self.history_window,
            self.visual_threshold,
            self.stall_threshold,
            self.repetition_threshold,
            self.repeat_stall_threshold,
            self.episodes,
            cell(self.success_rate),
            cell(self.strategic_calls_per_step),
            cell(self.tokens_per_task),
            cell(self.stuck_rate),
            cell(self.recovery_rate),
        )
    }
}

pub fn sweep(cfg: &RunConfig, settings: &[String]) -> Result<Verdict> {
    let scenarios = resolve_scenarios(&cfg.run.scenarios)?;
    let settings = settings.iter().map(|s| resolve_setting(s)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut failures = 0;
    for (name, th) in settings {
        let mut setting_cfg = cfg.clone();
        setting_cfg.control.thresholds = th;
        setting_cfg.run.out = cfg.run.out.join(&name);
        let logs = execute(&setting_cfg, &scenarios)?;
        write_logs(&setting_cfg.run.out, &logs)?;
        if let Verdict::EpisodeFailures(n) = Verdict::of(&logs) {
            failures += n;
        }
        let m = run_metrics(&logs)?;
        rows.push(SweepRow {
            setting: name,
            refresh_interval: th.refresh_interval,
            history_window: th.history_window,
            visual_threshold: th.visual_threshold,
            stall_threshold: th.stall_threshold,
            repetition_threshold: th.repetition_threshold,
            repeat_stall_threshold: th.repeat_stall_threshold,
            episodes: logs.len(),
            success_rate: m.get("SR").copied(),
            strategic_calls_per_step: m.get("Strategic calls / step").copied(),
            tokens_per_task: m.get("Tokens / Task").copied(),
            stuck_rate: m.get("Stuck Rate").copied(),
            recovery_rate: m.get("Recovery Rate").copied(),
        });
    }
    let mut csv = format!("{SWEEP_HEADER}\n");
    for row in &rows {
        csv.push_str(&row.csv());
        csv.push('\n');
    }
    fs::create_dir_all(&cfg.run.out)?;
    fs::write(cfg.run.out.join("sweep.csv"), &csv)?;
    fs::write(cfg.run.out.join("sweep.json"), serde_json::to_string_pretty(&rows)? + "\n")?;
    print!("{csv}");
    Ok(if failures == 0 { Verdict::AllSucceeded } else { Verdict::EpisodeFailures(failures) })
}

/// Parses every `*.jsonl` log in `dir`, in file-name order.
pub fn load_logs(dir: &Path) -> Result<Vec<EpisodeLog>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no episode logs (*.jsonl) in {}", dir.display());
    }
    paths.iter().map(|p| EpisodeLog::load(p).map_err(anyhow::Error::from)).collect()
}

pub fn report(dir: &Path, out: Option<&Path>) -> Result<()> {
    let logs = load_logs(dir)?;
    let report = build_report(&logs)?;
    let out = out.unwrap_or(dir);
    fs::create_dir_all(out)?;
    write_report(out, "report", &report)?;
    print!("{}", report.to_csv());
    Ok(())
}

fn descriptor_of(path: &Path) -> Result<Descriptor> {
    let img = image::open(path).with_context(|| format!("decoding {}", path.display()))?.to_rgb8();
    let (w, h) = img.dimensions();
    let frame = Frame::new(w as usize, h as usize, 3, img.into_raw())?;
    Ok(encode(&frame)?)
}

pub fn describe(image: &Path, against: Option<&Path>, dump: Option<&Path>) -> Result<()> {
    let d = descriptor_of(image)?;
    match dump {
        Some(path) => fs::write(path, d.to_csv() + "\n")?,
        None if against.is_none() => println!("{}", d.to_csv()),
        None => {}
    }
    if let Some(other) = against {
        println!("distance {:.6}", visual_distance(&d, &descriptor_of(other)?)?);
    }
    Ok(())
}
