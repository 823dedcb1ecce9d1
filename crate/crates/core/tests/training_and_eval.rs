use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use codeharness::envs::Observation;
use codeharness::eval::run_matches_1p;
use codeharness::harness::Agent;
use codeharness::trainer::{self, RefinerConfig, TrainConfig, Trainer};

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn config(dir: &Path) -> TrainConfig {
    let mut c = TrainConfig::new("nim", RefinerConfig::Fixture { oracle_at: 5 }, dir);
    c.rollout.n_envs = 4;
    c.rollout.max_steps = 200;
    c
}

#[test]
fn interrupted_run_resumes_to_the_same_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let straight = tmp.path().join("straight");
    let full = trainer::train(config(&straight)).unwrap();
    assert_eq!(full.best_heuristic, 1.0);
    assert!(full.iterations_used > 2);

    let split = tmp.path().join("split");
    let mut t = Trainer::new(config(&split)).unwrap();
    assert!(t.step().unwrap());
    assert!(t.step().unwrap());
    drop(t);
    let resumed = trainer::resume(&split).unwrap();
    let mut expected = full.clone();
    expected.tree_path = split.join("tree.json");
    assert_eq!(resumed, expected);
    assert_eq!(snapshot(&straight), snapshot(&split));
    assert_eq!(trainer::best_code(&split).unwrap(), codeharness::fixtures::oracle_harness("nim"));
}

/// Halves the remaining interval using the feedback line.
struct Bisect;

impl Agent for Bisect {
    fn name(&self) -> String {
        "bisect".into()
    }

    fn reset(&mut self, _seed: u64, _seat: usize) {}

    fn act(&mut self, obs: &Observation) -> String {
        let (mut lo, mut hi) = (1u32, 20u32);
        let feedback = obs
            .text
            .lines()
            .find_map(|l| l.strip_prefix("[GAME] Feedback so far: "))
            .unwrap_or("");
        for item in feedback.split(", ").filter(|s| s.starts_with('[')) {
            let (guess, hint) = item[1..].split_once("] ").unwrap();
            let g: u32 = guess.parse().unwrap();
            match hint {
                "higher" => lo = lo.max(g + 1),
                "lower" => hi = hi.min(g - 1),
                _ => {}
            }
        }
        format!("[{}]", (lo + hi) / 2)
    }
}

#[test]
fn bisection_always_finds_the_number() {
    let result = run_matches_1p(&mut Bisect, "guessthenumber", 50, 0).unwrap();
    assert_eq!(result.mean_reward, 1.0);
    assert!(result.records.iter().all(|r| r.turns <= 5));
}
