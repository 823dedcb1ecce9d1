use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_codeharness"))
}

#[test]
fn list_envs_prints_six_games() {
    let out = bin().arg("list-envs").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 6);
    for game in ["guessthenumber", "towerofhanoi", "frozenlake", "minesweeper-small", "tictactoe", "nim"] {
        assert!(text.contains(game), "{game}");
    }
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = bin().args(["train", "--config", "missing.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().arg("no-such-command").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_applies_overrides_and_persists_them() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    let config = dir.path().join("train.json");
    fs::write(
        &config,
        serde_json::json!({
            "game_id": "tictactoe",
            "refiner": {"kind": "fixture", "oracle_at": 3},
            "run_dir": run_dir,
        })
        .to_string(),
    )
    .unwrap();
    let out = bin()
        .args(["train", "--config"])
        .arg(&config)
        .args(["--set", "rollout.n_envs=3", "--set", "rollout.max_steps=200"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["best_heuristic"], 1.0);
    let persisted: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join("config.json")).unwrap()).unwrap();
    assert_eq!(persisted["rollout"]["n_envs"], 3);
    assert_eq!(persisted["rollout"]["max_steps"], 200);

    let bad = bin()
        .args(["train", "--config"])
        .arg(&config)
        .args(["--set", "rollout.bogus=1"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));

    // The run directory already holds a checkpoint: a domain error.
    let again = bin().args(["train", "--config"]).arg(&config).output().unwrap();
    assert_eq!(again.status.code(), Some(1));

    let resumed = bin().args(["train", "--resume"]).arg(&run_dir).output().unwrap();
    assert_eq!(resumed.status.code(), Some(0));
    assert_eq!(resumed.stdout, out.stdout);
}

#[test]
fn eval_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("eval.json");
    fs::write(
        &config,
        serde_json::json!({
            "run_dir": dir.path().join("eval"),
            "legal_rate_steps": 100,
            "legal_rate_seeds": 2,
            "suites": [
                {"game_id": "tictactoe", "agent": {"kind": "first_legal"}, "opponent": {"kind": "random"}, "matches": 6},
                {"game_id": "guessthenumber", "agent": {"kind": "harness", "mode": {"kind": "policy"}, "code": "oracle_fixture"}}
            ]
        })
        .to_string(),
    )
    .unwrap();
    let out = bin().args(["eval", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("eval/report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(dir.path().join("eval/report.md").exists());
}

#[test]
fn play_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let transcript = dir.path().join("match.jsonl");
    let out = bin()
        .args(["play", "--game", "nim", "--seed", "3", "--agent", r#"{"kind":"first_legal"}"#, "--transcript"])
        .arg(&transcript)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let replay = bin().arg("replay").arg(&transcript).output().unwrap();
    assert_eq!(replay.status.code(), Some(0));
    assert_eq!(replay.stdout, out.stdout);
    assert!(String::from_utf8(out.stdout).unwrap().contains("game over"));
}
