use std::fs;
use std::path::Path;

use assert_cmd::Command;
use predicates::prelude::*;

fn deliberate() -> Command {
    let mut cmd = Command::cargo_bin("deliberate").unwrap();
    cmd.env_remove("DELIBERATE_SEED").env_remove("DELIBERATE_OUT");
    cmd
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn clean_scenario_succeeds_with_complete_log() {
    let dir = tempfile::tempdir().unwrap();
    deliberate().args(["run", "--scenario", "clean", "--out"]).arg(dir.path()).assert().success();
    let log = fs::read_to_string(dir.path().join("clean.run0.jsonl")).unwrap();
    assert!(log.starts_with("{\"type\":\"header\""));
    assert!(log.lines().last().unwrap().contains("\"status\":\"success\""));
    assert!(dir.path().join("summary.json").exists() && dir.path().join("summary.csv").exists());
}

#[test]
fn repeats_are_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        deliberate().args(["run", "--repeat", "3", "--workers", "3", "--out"]).arg(dir.path()).assert().success();
    }
    let files = read_dir_sorted(a.path());
    assert_eq!(files.iter().filter(|(n, _)| n.starts_with("clean.run")).count(), 3);
    assert_eq!(files, read_dir_sorted(b.path()));
    let run2 = fs::read_to_string(a.path().join("clean.run2.jsonl")).unwrap();
    assert!(run2.contains("\"seed\":44,\"run_index\":2"));
}

#[test]
fn worker_count_does_not_change_logs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    deliberate().args(["run", "--workers", "1", "--out"]).arg(a.path()).assert().success();
    deliberate().args(["run", "--workers", "8", "--out"]).arg(b.path()).assert().success();
    assert_eq!(read_dir_sorted(a.path()), read_dir_sorted(b.path()));
}

#[test]
fn missing_scenario_is_a_configuration_error() {
    deliberate().args(["run", "--scenario", "no/such/file.json"]).assert().code(2).stderr(predicate::str::contains("no/such/file.json"));
}

#[test]
fn failed_episodes_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    deliberate().args(["run", "--scenario", "walled-easy", "--out"]).arg(dir.path()).assert().code(1);
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[loop.thresholds]\nrefresh_interval = 0\n").unwrap();
    deliberate().args(["run", "--config"]).arg(&cfg).assert().code(2);
    fs::write(&cfg, "[run]\nsead = 1\n").unwrap();
    deliberate().args(["run", "--config"]).arg(&cfg).assert().code(2).stderr(predicate::str::contains("sead"));
}

#[test]
fn printed_config_round_trips_to_identical_runs() {
    let dir = tempfile::tempdir().unwrap();
    let printed = deliberate().args(["run", "--setting", "more-reactive", "--seed", "7", "--print-config"]).output().unwrap();
    assert!(printed.status.success());
    let text = String::from_utf8(printed.stdout).unwrap();
    assert!(text.contains("seed = 7") && text.contains("refresh_interval = 6"));
    let cfg = dir.path().join("effective.toml");
    fs::write(&cfg, &text).unwrap();

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    deliberate().args(["run", "--setting", "more-reactive", "--seed", "7", "--out"]).arg(&a).assert().success();
    deliberate().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&b).assert().success();
    assert_eq!(read_dir_sorted(&a), read_dir_sorted(&b));
}

#[test]
fn env_overrides_seed_and_output() {
    let dir = tempfile::tempdir().unwrap();
    deliberate().args(["run", "--scenario", "clean"]).env("DELIBERATE_SEED", "5").env("DELIBERATE_OUT", dir.path()).assert().success();
    let log = fs::read_to_string(dir.path().join("clean.run0.jsonl")).unwrap();
    assert!(log.contains("\"seed\":5,"));
}

#[test]
fn report_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    deliberate().args(["run", "--repeat", "3", "--out"]).arg(dir.path()).assert().success();
    deliberate().arg("report").arg(dir.path()).assert().success().stdout(predicate::str::starts_with("metric,mean,std,runs"));
    let first = (fs::read(dir.path().join("report.csv")).unwrap(), fs::read(dir.path().join("report.json")).unwrap());
    deliberate().arg("report").arg(dir.path()).assert().success();
    let second = (fs::read(dir.path().join("report.csv")).unwrap(), fs::read(dir.path().join("report.json")).unwrap());
    assert_eq!(first, second);
    let json: serde_json::Value = serde_json::from_slice(&first.1).unwrap();
    assert_eq!(json["runs"], 3);
}

#[test]
fn corrupt_log_names_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    deliberate().args(["run", "--scenario", "clean", "--out"]).arg(dir.path()).assert().success();
    let path = dir.path().join("clean.run0.jsonl");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let truncated = &lines[2][..lines[2].len() / 2].to_string();
    lines[2] = truncated;
    fs::write(&path, lines.join("\n")).unwrap();
    deliberate().arg("report").arg(dir.path()).assert().code(2).stderr(predicate::str::contains("clean.run0.jsonl:3"));
}

#[test]
fn empty_log_directory_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    deliberate().arg("report").arg(dir.path()).assert().code(2).stderr(predicate::str::contains("no episode logs"));
}

#[test]
fn sweep_orders_named_settings() {
    let dir = tempfile::tempdir().unwrap();
    deliberate().args(["sweep", "--out"]).arg(dir.path()).assert().success();
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), ["more-strategic", "default", "more-reactive", "no-periodic-refresh"]);
    assert!(rows.iter().all(|r| r[2] == "5"), "history window must stay fixed");
    let rates: Vec<f64> = rows.iter().map(|r| r[9].parse().unwrap()).collect();
    assert!(rates.windows(2).all(|w| w[0] > w[1]), "{rates:?}");
}

#[test]
fn unknown_setting_is_rejected() {
    deliberate().args(["sweep", "--settings", "default,turbo"]).assert().code(2).stderr(predicate::str::contains("turbo"));
}

#[test]
fn custom_setting_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let setting = dir.path().join("wide.toml");
    fs::write(&setting, "refresh_interval = 8\nvisual_threshold = 0.5\n").unwrap();
    deliberate()
        .args(["sweep", "--scenario", "clean", "--settings"])
        .arg(&setting)
        .arg("--out")
        .arg(dir.path().join("out"))
        .assert()
        .success()
        .stdout(predicate::str::contains("wide,8,5,0.5"));
}

#[test]
fn shared_memory_dir_persists_stores() {
    let dir = tempfile::tempdir().unwrap();
    let mem = dir.path().join("mem");
    for _ in 0..2 {
        deliberate()
            .args(["run", "--scenario", "clean", "--memory-dir"])
            .arg(&mem)
            .arg("--out")
            .arg(dir.path().join("out"))
            .assert()
            .success();
    }
    let edges = fs::read_to_string(mem.join("edges.jsonl")).unwrap();
    assert!(edges.lines().count() > 0);
    assert!(edges.contains("\"exec_count\":2"));
}

#[test]
fn describe_prints_descriptor_and_distance() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
    image::GrayImage::from_fn(40, 40, |x, y| image::Luma([if (x / 5 + y / 5) % 2 == 0 { 0 } else { 255 }])).save(&a).unwrap();
    image::GrayImage::from_fn(40, 40, |x, y| image::Luma([if (x / 5 + y / 5) % 2 == 0 { 255 } else { 0 }])).save(&b).unwrap();
    let out = deliberate().arg("describe").arg(&a).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim().split(',').count(), 1024);
    deliberate().arg("describe").arg(&a).arg(&b).assert().success().stdout(predicate::str::contains("distance 2.000000"));
}
