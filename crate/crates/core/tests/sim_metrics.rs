use std::collections::VecDeque;

use deliberate::harness::{run_scripted, AgentProfile, DEFAULT_SEED};
use deliberate::metrics::{budgeted_sr, build_report, stuck_recovery, success_rate, EpisodeOutcome};
use deliberate::runtime::{BudgetMode, EpisodeLog, EpisodeStatus, LoopConfig};
use deliberate::sim::{pack, Scenario};
use deliberate::Error;
use proptest::prelude::*;

fn bfs_moves(s: &Scenario) -> Option<usize> {
    let grid: Vec<Vec<char>> = s.map.iter().map(|r| r.chars().collect()).collect();
    let find = |c: char| grid.iter().enumerate().find_map(|(y, row)| row.iter().position(|&v| v == c).map(|x| (x, y)));
    let (start, goal) = (find('A')?, find('T')?);
    let mut dist = vec![vec![usize::MAX; grid[0].len()]; grid.len()];
    dist[start.1][start.0] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some((x, y)) = queue.pop_front() {
        if (x, y) == goal {
            return Some(dist[y][x]);
        }
        for (dx, dy) in [(0i64, -1i64), (1, 0), (0, 1), (-1, 0)] {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            let Some(row) = grid.get(ny as usize) else { continue };
            let Some(&c) = row.get(nx as usize) else { continue };
            let (nx, ny) = (nx as usize, ny as usize);
            if c != '#' && dist[ny][nx] == usize::MAX {
                dist[ny][nx] = dist[y][x] + 1;
                queue.push_back((nx, ny));
            }
        }
    }
    None
}

fn run(name: &str, mode: BudgetMode, profile: AgentProfile) -> EpisodeLog {
    run_scripted(&pack::get(name).unwrap(), &LoopConfig::default(), mode, profile, DEFAULT_SEED, 0).unwrap()
}

#[test]
fn clean_room_episode_is_shortest_path() {
    let scenario = pack::get("twelve-step").unwrap();
    let select = usize::from(scenario.required_tool.is_some() && scenario.selected_tool.is_none());
    let log = run("twelve-step", BudgetMode::StepCapped, AgentProfile::Triggered);
    assert_eq!(log.status(), EpisodeStatus::Success);
    assert_eq!(log.steps.len(), bfs_moves(&scenario).unwrap() + select);
    assert_eq!(log.steps.len(), 12);
}

#[test]
fn walled_goal_is_unreachable_and_hits_the_cap() {
    let scenario = pack::get("walled-easy").unwrap();
    assert_eq!(bfs_moves(&scenario), None);
    let log = run("walled-easy", BudgetMode::StepCapped, AgentProfile::Triggered);
    assert_eq!(log.status(), EpisodeStatus::StepCap);
    assert_eq!(log.steps.len(), 30);
}

#[test]
fn budgeted_success_separates_call_rates() {
    // A long easy route fits the call budget at one call per step but not at four.
    let frugal = run("serpentine", BudgetMode::CallBudgeted, AgentProfile::OneCallPerStep);
    let chatty = run("serpentine", BudgetMode::CallBudgeted, AgentProfile::FourCallsPerStep);
    assert_eq!(budgeted_sr(&[EpisodeOutcome::from(&frugal)]).unwrap(), 1.0);
    assert_eq!(budgeted_sr(&[EpisodeOutcome::from(&chatty)]).unwrap(), 0.0);
    assert_eq!(chatty.status(), EpisodeStatus::BudgetExhausted);
    assert_eq!(chatty.end.steps, 30);
}

#[test]
fn success_rate_rejects_mixed_modes() {
    let a = EpisodeOutcome::from(&run("clean", BudgetMode::StepCapped, AgentProfile::Triggered));
    let b = EpisodeOutcome::from(&run("clean", BudgetMode::CallBudgeted, AgentProfile::Triggered));
    assert!(success_rate(&[a, b]).is_err());
    assert!(budgeted_sr(&[a]).is_err());
}

#[test]
fn log_round_trips_through_jsonl() {
    let log = run("hard-failure", BudgetMode::StepCapped, AgentProfile::Triggered);
    let text = log.to_jsonl();
    let parsed = EpisodeLog::parse(&text, "mem").unwrap();
    assert_eq!(parsed.to_jsonl(), text);
}

#[test]
fn truncated_line_names_file_and_line() {
    let text = run("clean", BudgetMode::StepCapped, AgentProfile::Triggered).to_jsonl();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let half = lines[3].len() / 2;
    lines[3].truncate(half);
    match EpisodeLog::parse(&lines.join("\n"), "clean.run0.jsonl") {
        Err(Error::Parse { path, line, .. }) => assert_eq!((path.as_str(), line), ("clean.run0.jsonl", 4)),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn missing_end_record_is_rejected() {
    let text = run("clean", BudgetMode::StepCapped, AgentProfile::Triggered).to_jsonl();
    let without_end: Vec<&str> = text.lines().take(text.lines().count() - 1).collect();
    assert!(EpisodeLog::parse(&without_end.join("\n"), "x").is_err());
}

#[test]
fn report_groups_runs_and_is_stable() {
    let logs: Vec<EpisodeLog> = (0..3)
        .flat_map(|r| {
            pack::standard().into_iter().map(move |s| {
                run_scripted(&s, &LoopConfig::default(), BudgetMode::StepCapped, AgentProfile::Triggered, DEFAULT_SEED + r as u64, r)
                    .unwrap()
            })
        })
        .collect();
    let report = build_report(&logs).unwrap();
    assert_eq!(report.runs, 3);
    assert_eq!(report.episodes, 21);
    let csv = report.to_csv();
    assert!(csv.starts_with("metric,mean,std,runs\n"));
    assert_eq!(csv, build_report(&logs).unwrap().to_csv());
    let sr = report.rows.iter().find(|r| r.metric == "SR").unwrap().summary.unwrap();
    assert_eq!(sr.runs, 3);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn recovery_stats_ignore_episode_order(seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut logs: Vec<EpisodeLog> = pack::standard()
            .iter()
            .map(|s| run_scripted(s, &LoopConfig::default(), BudgetMode::StepCapped, AgentProfile::Triggered, DEFAULT_SEED, 0).unwrap())
            .collect();
        let before = stuck_recovery(&logs).unwrap();
        logs.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(before, stuck_recovery(&logs).unwrap());
    }
}

#[test]
fn swallowed_moves_count_as_stuck_and_recover() {
    let log = run("repetition-trap", BudgetMode::StepCapped, AgentProfile::Triggered);
    let (_, stuck, recovered) = deliberate::metrics::episode_counts(&log);
    assert_eq!(stuck, 2);
    assert!(recovered >= 1 && recovered <= stuck);
}
