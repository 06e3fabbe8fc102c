mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::*;
use serde_json::Value;

fn verify(dir: &std::path::Path, game: &str, candidate: &str, extra: &[&str]) -> (std::process::Output, Value) {
    let out = dir.join("report.json");
    let mut args = vec!["verify", "--game", game, "--candidate", candidate, "--seed", "42", "--json"];
    let out_s = out.to_str().unwrap().to_string();
    args.push(&out_s);
    args.extend_from_slice(extra);
    let o = cwm(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = read_json(&out);
    check_schema(&report);
    (o, report)
}

fn tier<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["tiers"]
        .as_array()
        .unwrap()
        .iter()
        .find(|t| t["tier"] == name)
        .unwrap()
}

#[test]
fn verify_reference_leduc_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let (o, r) = verify(dir.path(), "leduc_poker", "builtin:leduc_poker", &[]);
    assert_eq!(r["mean"], 1.0);
    assert_eq!(r["reward"]["reward"], 1.0);
    assert_eq!(r["config"]["fuzz_n"], 100);
    assert!(stdout(&o).contains("mean        1.0000"));
}

#[test]
fn verify_reports_mutant_dynamics() {
    let dir = tempfile::tempdir().unwrap();
    let (o, r) = verify(dir.path(), "tic_tac_toe", "builtin:mutant_mutating", &[]);
    assert_eq!(tier(&r, "dynamics")["score"], 0.75);
    assert!(stdout(&o).contains("failed: immutable"));
}

#[test]
fn verify_accepts_scenario_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = workspace_root().join("crates/core/scenarios/generalized_tic_tac_toe.scenarios.json");
    let (_, r) = verify(
        dir.path(),
        "generalized_tic_tac_toe",
        "builtin:generalized_tic_tac_toe",
        &["--scenarios", path.to_str().unwrap(), "--fuzz-n", "10"],
    );
    assert_eq!(tier(&r, "scenarios")["checks"].as_array().unwrap().len(), 7);
    assert_eq!(r["mean"], 1.0);
}

#[test]
fn candidate_faults_do_not_change_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    for m in ["mutant_syntax_error", "mutant_crashing", "mutant_scalar_rewards", "mutant_dead_end"] {
        let (_, r) = verify(dir.path(), "tic_tac_toe", &format!("builtin:{m}"), &["--fuzz-n", "20"]);
        assert!(r["mean"].as_f64().unwrap() < 1.0, "{m}");
    }
    let (_, r) = verify(dir.path(), "tic_tac_toe", "builtin:mutant_syntax_error", &[]);
    assert_eq!(r["load_ok"], false);
    assert_eq!(r["reward"]["reward"], 0.0);
}

#[test]
fn file_candidates_run_under_the_adapter() {
    let dir = tempfile::tempdir().unwrap();
    let cand = dir.path().join("kuhn.py");
    std::fs::write(&cand, "builtin:kuhn_poker 42").unwrap();
    let adapter = adapter_command();
    let (_, r) = verify(
        dir.path(),
        "kuhn_poker",
        cand.to_str().unwrap(),
        &["--adapter", &adapter, "--fuzz-n", "20", "--info-n", "20"],
    );
    assert_eq!(r["candidate"]["kind"], "file");
    assert_eq!(r["mean"], 1.0);

    let missing = dir.path().join("missing.py");
    let (_, r) = verify(dir.path(), "kuhn_poker", missing.to_str().unwrap(), &["--adapter", &adapter]);
    assert_eq!(r["load_ok"], false);
    assert!(r["load_error"].as_str().unwrap().contains("missing.py"));
    assert_eq!(r["mean"], 0.0);
}

#[test]
fn usage_errors_exit_2() {
    let o = cwm(&["verify", "--game", "chess", "--candidate", "builtin:tic_tac_toe"]);
    assert_eq!(o.status.code(), Some(2));
    for g in ["tic_tac_toe", "generalized_tic_tac_toe", "kuhn_poker", "leduc_poker"] {
        assert!(stderr(&o).contains(g), "{}", stderr(&o));
    }
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"format_version\": 1,").unwrap();
    let kuhn = workspace_root().join("crates/core/scenarios/kuhn_poker.scenarios.json");
    for args in [
        vec!["verify", "--game", "tic_tac_toe", "--candidate", "builtin:chess"],
        vec!["verify", "--game", "tic_tac_toe", "--candidate", "builtin:tic_tac_toe", "--scenarios", bad.to_str().unwrap()],
        vec!["verify", "--game", "tic_tac_toe", "--candidate", "builtin:tic_tac_toe", "--scenarios", kuhn.to_str().unwrap()],
        vec!["verify", "--game", "tic_tac_toe"],
        vec!["reward", "--game", "tic_tac_toe", "--candidate", "builtin:tic_tac_toe", "--timeout", "0"],
        vec!["play", "--game", "tic_tac_toe", "--candidate", "builtin:tic_tac_toe", "--agent0", "ismcts:sims=10", "--agent1", "random"],
        vec!["play", "--game", "kuhn_poker", "--candidate", "builtin:kuhn_poker", "--agent0", "mcts:sims=10", "--agent1", "random"],
        vec!["play", "--game", "kuhn_poker", "--candidate", "builtin:kuhn_poker", "--agent0", "alphazero", "--agent1", "random"],
        vec!["frobnicate"],
    ] {
        let o = cwm(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn harness_faults_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let unwritable = dir.path().join("no/such/dir/report.json");
    let o = cwm(&[
        "verify", "--game", "tic_tac_toe", "--candidate", "builtin:tic_tac_toe", "--fuzz-n", "5",
        "--json", unwritable.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = cwm(&[
        "verify", "--game", "tic_tac_toe", "--candidate", "x.py", "--adapter", "/nonexistent/adapter",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

fn reward(candidate: &str, game: &str, extra: &[&str]) -> (String, Value) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let mut args = vec!["reward", "--game", game, "--candidate", candidate, "--json", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = cwm(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = last_line(&o);
    let v: f64 = line.parse().unwrap_or_else(|_| panic!("last line {line:?} is not a decimal"));
    assert!((0.0..=1.0).contains(&v));
    let report = read_json(&out);
    check_schema(&report);
    (line, report)
}

#[test]
fn reward_prints_a_decimal_last() {
    assert_eq!(reward("builtin:tic_tac_toe", "tic_tac_toe", &[]).0, "1.0");
    assert_eq!(reward("builtin:leduc_poker", "leduc_poker", &[]).0, "1.0");
    assert_eq!(reward("builtin:mutant_stub_resampler", "kuhn_poker", &[]).0, "0.7");
    assert_eq!(reward("builtin:mutant_syntax_error", "tic_tac_toe", &[]).0, "0.0");
    let (line, r) = reward("builtin:mutant_mutating", "tic_tac_toe", &["--seed", "3"]);
    assert_eq!(line.parse::<f64>().unwrap(), r["reward"]["reward"].as_f64().unwrap());
}

#[test]
fn hanging_candidate_rewards_zero_on_time() {
    let start = Instant::now();
    let (line, r) = reward("builtin:mutant_hanging", "tic_tac_toe", &["--timeout", "2"]);
    assert!(start.elapsed() < Duration::from_secs(6));
    assert_eq!(line, "0.0");
    assert_eq!(r["reward"]["timed_out"], true);
}

#[test]
fn play_reports_a_match() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    let o = cwm(&[
        "play", "--game", "tic_tac_toe", "--candidate", "builtin:tic_tac_toe",
        "--agent0", "mcts:sims=300", "--agent1", "random", "--games", "10", "--seed", "7",
        "--json", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_json(&out);
    assert_eq!(r["games_played"], 10);
    assert_eq!(r["losses"], 0);
    assert!(stdout(&o).contains("W/D/L"));
}

fn serve(dir: &std::path::Path, input: &str, parallel: &str) -> (Vec<Value>, String) {
    let games = dir.join("games");
    let scen = workspace_root().join("crates/core/scenarios");
    let o = cwm_stdin(
        &[
            "serve", "--games-dir", games.to_str().unwrap(), "--scenarios-dir", scen.to_str().unwrap(),
            "--parallel", parallel,
        ],
        input,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let lines = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str(l).expect("one JSON object per line"))
        .collect();
    (lines, stderr(&o))
}

fn games_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("games")).unwrap();
    for (file, body) in [
        ("ttt.py", "builtin:tic_tac_toe"),
        ("kuhn.py", "builtin:kuhn_poker 1"),
        ("leduc.py", "builtin:leduc_poker 2"),
        ("stub.py", "builtin:mutant_stub_resampler"),
    ] {
        std::fs::write(dir.path().join("games").join(file), body).unwrap();
    }
    dir
}

#[test]
fn serve_answers_each_request_once() {
    let dir = games_dir();
    let input = [
        r#"{"id": 1, "game": "tic_tac_toe", "candidate_path": "ttt.py"}"#,
        r#"{"id": "two", "game": "kuhn_poker", "candidate_path": "stub.py"}"#,
        r#"{"id": 3, "game": "kuhn_poker", "candidate_path": "missing.py"}"#,
        "this is not json",
        r#"{"id": 5, "game": "chess", "candidate_path": "ttt.py"}"#,
        r#"{"id": 6, "game": "tic_tac_toe"}"#,
    ]
    .join("\n");
    let (lines, _) = serve(dir.path(), &input, "2");
    assert_eq!(lines.len(), 6);
    let by_id = |id: Value| lines.iter().find(|l| l["id"] == id).unwrap().clone();
    assert_eq!(by_id(1.into())["reward"], 1.0);
    assert_eq!(by_id("two".into())["reward"], 0.7);
    let missing = by_id(3.into());
    assert_eq!(missing["reward"], 0.0);
    assert!(missing["breakdown"]["load_error"].as_str().unwrap().contains("missing.py"));
    assert!(by_id(Value::Null)["error"].is_string());
    assert!(by_id(5.into())["error"].as_str().unwrap().contains("unknown game"));
    assert!(by_id(6.into())["error"].is_string());
}

#[test]
fn serve_caps_live_adapters() {
    let dir = games_dir();
    let files = ["ttt.py", "kuhn.py", "leduc.py", "stub.py"];
    let games = ["tic_tac_toe", "kuhn_poker", "leduc_poker", "kuhn_poker"];
    let input: Vec<String> = (0..8)
        .map(|i| {
            format!(
                r#"{{"id": {i}, "game": "{}", "candidate_path": "{}"}}"#,
                games[i % 4],
                files[i % 4]
            )
        })
        .collect();
    let (lines, err) = serve(dir.path(), &input.join("\n"), "4");
    let ids: BTreeSet<i64> = lines.iter().map(|l| l["id"].as_i64().unwrap()).collect();
    assert_eq!(lines.len(), 8);
    assert_eq!(ids, (0..8).collect());
    assert!(lines.iter().all(|l| l["reward"].is_number()));
    let peak: usize = err
        .lines()
        .find_map(|l| l.split("peak live adapters ").nth(1))
        .expect("peak reported")
        .trim()
        .parse()
        .unwrap();
    assert!((1..=4).contains(&peak), "peak {peak}");
}

#[test]
fn verify_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = cwm(&[
            "verify", "--game", "kuhn_poker", "--candidate", "builtin:kuhn_poker", "--seed", "9",
            "--json", out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        let mut v = read_json(&out);
        v["timings_ms"] = Value::Null;
        serde_json::to_string(&v).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}
