//! The outer search loop and its run directory.
//!
//! Each iteration selects a node, re-scores it, refines it once, and scores
//! the child. All state lives in the run directory and is rewritten at the
//! end of every iteration, so a run can resume after any completed
//! iteration. Nothing time-dependent is persisted.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};

use crate::critic::{refine, Refinement};
use crate::envs::{game_spec, EnvError, GameSpec};
use crate::executor::{serde_secs, splitmix64, ExecLimits, Executor, GuestFunction, ProcessExecutor, ScriptedExecutor};
use crate::fixtures;
use crate::llm::{HttpClient, LlmClient, LlmConfig, LlmError, ScriptedClient};
use crate::rollout::{run_rollouts, RolloutError, RolloutParams, RolloutReport};
use crate::tree::{CodeHypothesis, HypothesisTree, Mode, NodeStats, SelectionConfig, TreeError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("run directory is inconsistent: {0}")]
    Integrity(String),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Where refined code comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RefinerConfig {
    /// Built-in fixture replies whose `oracle_at`-th reply is the oracle
    /// harness for the game.
    Fixture { oracle_at: usize },
    /// Canned replies served in order.
    Scripted { responses: Vec<String> },
    Http(LlmConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExecutorConfig {
    Scripted {
        #[serde(default)]
        limits: ExecLimits,
    },
    Process {
        command: Vec<String>,
        #[serde(default)]
        limits: ExecLimits,
    },
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        ExecutorConfig::Scripted {
            limits: ExecLimits::default(),
        }
    }
}

impl ExecutorConfig {
    pub fn build(&self) -> Box<dyn Executor> {
        match self {
            ExecutorConfig::Scripted { limits } => Box::new(ScriptedExecutor::new(limits.clone())),
            ExecutorConfig::Process { command, limits } => {
                Box::new(ProcessExecutor::new(command.clone(), limits.clone()))
            }
        }
    }
}

fn default_budget() -> Duration {
    Duration::from_secs(2 * 60 * 60)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub game_id: String,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub rollout: RolloutParams,
    #[serde(default)]
    pub selection: SelectionConfig,
    /// `None` uses the mode's default.
    #[serde(default)]
    pub max_iterations: Option<u64>,
    #[serde(default = "default_budget", with = "serde_secs")]
    pub wall_clock_budget: Duration,
    pub refiner: RefinerConfig,
    #[serde(default)]
    pub executor: ExecutorConfig,
    /// Not persisted: the directory is wherever config.json lives.
    #[serde(default, skip_serializing)]
    pub run_dir: PathBuf,
}

fn default_mode() -> Mode {
    Mode::Verifier
}

impl TrainConfig {
    pub fn new(game_id: &str, refiner: RefinerConfig, run_dir: impl Into<PathBuf>) -> Self {
        TrainConfig {
            game_id: game_id.to_string(),
            mode: Mode::Verifier,
            rollout: RolloutParams::default(),
            selection: SelectionConfig::default(),
            max_iterations: None,
            wall_clock_budget: default_budget(),
            refiner,
            executor: ExecutorConfig::default(),
            run_dir: run_dir.into(),
        }
    }

    pub fn iteration_cap(&self) -> u64 {
        self.max_iterations.unwrap_or(match self.mode {
            Mode::Verifier => 128,
            Mode::Policy => 256,
        })
    }

    /// Attempted steps a node needs before a perfect score ends the search.
    pub fn stop_evidence(&self) -> u64 {
        self.rollout.n_envs as u64 * self.rollout.max_steps.min(100)
    }

    pub fn validate(&self) -> Result<GameSpec, TrainError> {
        let game = game_spec(&self.game_id)?;
        if self.iteration_cap() == 0 {
            return Err(TrainError::Config("max_iterations must be at least 1".into()));
        }
        if self.mode == Mode::Policy && game.players != 1 {
            return Err(TrainError::Config(
                "policy-mode training needs a single-player game".into(),
            ));
        }
        if let RefinerConfig::Fixture { oracle_at: 0 } = self.refiner {
            return Err(TrainError::Config("oracle_at is 1-based".into()));
        }
        self.rollout.validate()?;
        self.selection.validate()?;
        Ok(game)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Solved,
    MaxIterations,
    WallClock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iteration: u64,
    pub node_id: usize,
    pub heuristic: f64,
    pub attempted: u64,
    pub legal: u64,
    pub exec_failures: u64,
}

pub const METRICS_HEADER: &str = "iteration,node_id,heuristic,attempted,legal,exec_failures";

impl MetricsRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.iteration, self.node_id, self.heuristic, self.attempted, self.legal, self.exec_failures
        )
    }

    fn parse(line: &str) -> Option<MetricsRow> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return None;
        }
        Some(MetricsRow {
            iteration: f[0].parse().ok()?,
            node_id: f[1].parse().ok()?,
            heuristic: f[2].parse().ok()?,
            attempted: f[3].parse().ok()?,
            legal: f[4].parse().ok()?,
            exec_failures: f[5].parse().ok()?,
        })
    }
}

/// One refinement attempt as recorded in tree.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementEntry {
    pub iteration: u64,
    pub parent_id: usize,
    pub targets: Vec<GuestFunction>,
    pub child_id: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NodeEntry {
    node_id: usize,
    parent_id: Option<usize>,
    created_at_iteration: u64,
    code_file: String,
    stats: NodeStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TreeFile {
    game_id: String,
    mode: Mode,
    iterations_used: u64,
    stop_reason: Option<StopReason>,
    best_node_id: usize,
    best_heuristic: f64,
    refinement_calls: usize,
    nodes: Vec<NodeEntry>,
    refinements: Vec<RefinementEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub best_node_id: usize,
    pub best_heuristic: f64,
    pub iterations_used: u64,
    pub stop_reason: Option<StopReason>,
    pub tree_path: PathBuf,
    pub metrics: Vec<MetricsRow>,
}

pub struct Trainer {
    config: TrainConfig,
    game: GameSpec,
    tree: HypothesisTree,
    iterations_used: u64,
    stop_reason: Option<StopReason>,
    best: (usize, f64),
    refinement_calls: usize,
    refinements: Vec<RefinementEntry>,
    metrics: Vec<MetricsRow>,
    executor: Box<dyn Executor>,
    llm: Box<dyn LlmClient>,
    started: Instant,
}

fn build_llm(config: &TrainConfig, offset: usize) -> Result<Box<dyn LlmClient>, TrainError> {
    Ok(match &config.refiner {
        RefinerConfig::Fixture { oracle_at } => Box::new(
            ScriptedClient::sequence(fixtures::scripted_refinements(&config.game_id, *oracle_at))
                .starting_at(offset),
        ),
        RefinerConfig::Scripted { responses } => {
            Box::new(ScriptedClient::sequence(responses.clone()).starting_at(offset))
        }
        RefinerConfig::Http(llm) => Box::new(HttpClient::new(llm.clone())?),
    })
}

/// Seed for the `k`-th rollout of iteration `iteration`.
fn derive_seed(base: u64, iteration: u64, k: u64) -> u64 {
    splitmix64(base ^ splitmix64(iteration.wrapping_mul(2).wrapping_add(k)))
}

fn write(path: &Path, contents: &str) -> Result<(), TrainError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn node_dir(run_dir: &Path, node_id: usize) -> PathBuf {
    run_dir.join("nodes").join(node_id.to_string())
}

impl Trainer {
    /// Starts a fresh run. The run directory must not hold a checkpoint.
    pub fn new(mut config: TrainConfig) -> Result<Self, TrainError> {
        config.rollout.mode = config.mode;
        let game = config.validate()?;
        let dir = config.run_dir.clone();
        if dir.join("tree.json").exists() {
            return Err(TrainError::Config(format!(
                "{} already holds a run; resume it instead",
                dir.display()
            )));
        }
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let tree = HypothesisTree::new(&fixtures::stub_code(config.mode), config.mode)?;
        let trainer = Trainer {
            executor: config.executor.build(),
            llm: build_llm(&config, 0)?,
            config,
            game,
            tree,
            iterations_used: 0,
            stop_reason: None,
            best: (0, 0.0),
            refinement_calls: 0,
            refinements: Vec::new(),
            metrics: Vec::new(),
            started: Instant::now(),
        };
        let config_json = serde_json::to_string_pretty(&trainer.config).expect("config serializes");
        write(&dir.join("config.json"), &format!("{config_json}\n"))?;
        trainer.write_node(0, "", "")?;
        write(&node_dir(&dir, 0).join("rollouts.jsonl"), "")?;
        trainer.persist()?;
        Ok(trainer)
    }

    /// Reopens a run from its directory.
    pub fn resume(run_dir: &Path) -> Result<Self, TrainError> {
        let read = |name: &str| -> Result<String, TrainError> {
            let path = run_dir.join(name);
            fs::read_to_string(&path)
                .map_err(|e| TrainError::Integrity(format!("cannot read {}: {e}", path.display())))
        };
        let mut config: TrainConfig = serde_json::from_str(&read("config.json")?)
            .map_err(|e| TrainError::Integrity(format!("config.json: {e}")))?;
        config.run_dir = run_dir.to_path_buf();
        let game = config.validate()?;
        let state: TreeFile = serde_json::from_str(&read("tree.json")?)
            .map_err(|e| TrainError::Integrity(format!("tree.json: {e}")))?;
        if state.game_id != config.game_id || state.mode != config.mode {
            return Err(TrainError::Integrity("tree.json does not match config.json".into()));
        }
        let mut nodes = Vec::with_capacity(state.nodes.len());
        for entry in &state.nodes {
            let code = read(&entry.code_file)?;
            nodes.push(CodeHypothesis {
                node_id: entry.node_id,
                parent_id: entry.parent_id,
                code,
                created_at_iteration: entry.created_at_iteration,
                stats: entry.stats.clone(),
            });
        }
        let tree = HypothesisTree::from_nodes(state.mode, nodes)
            .map_err(|e| TrainError::Integrity(format!("tree.json: {e}")))?;
        let mut metrics = Vec::new();
        for (i, line) in read("metrics.csv")?.lines().enumerate().skip(1) {
            metrics.push(MetricsRow::parse(line).ok_or_else(|| {
                TrainError::Integrity(format!("metrics.csv line {} is malformed", i + 1))
            })?);
        }
        if state.best_node_id >= tree.len() {
            return Err(TrainError::Integrity("best node is not in the tree".into()));
        }
        Ok(Trainer {
            executor: config.executor.build(),
            llm: build_llm(&config, state.refinement_calls)?,
            config,
            game,
            tree,
            iterations_used: state.iterations_used,
            stop_reason: state.stop_reason,
            best: (state.best_node_id, state.best_heuristic),
            refinement_calls: state.refinement_calls,
            refinements: state.refinements,
            metrics,
            started: Instant::now(),
        })
    }

    pub fn tree(&self) -> &HypothesisTree {
        &self.tree
    }

    pub fn refinements(&self) -> &[RefinementEntry] {
        &self.refinements
    }

    pub fn is_finished(&self) -> bool {
        self.stop_reason.is_some()
    }

    pub fn artifacts(&self) -> RunArtifacts {
        RunArtifacts {
            best_node_id: self.best.0,
            best_heuristic: self.best.1,
            iterations_used: self.iterations_used,
            stop_reason: self.stop_reason,
            tree_path: self.config.run_dir.join("tree.json"),
            metrics: self.metrics.clone(),
        }
    }

    /// Runs iterations until a stop rule fires.
    pub fn train(&mut self) -> Result<RunArtifacts, TrainError> {
        while self.step()? {}
        Ok(self.artifacts())
    }

    fn solved(&self, node_id: usize) -> bool {
        let stats = &self.tree.nodes()[node_id].stats;
        self.config.mode == Mode::Verifier
            && stats.heuristic == 1.0
            && stats.steps_attempted >= self.config.stop_evidence()
    }

    fn score(&mut self, node_id: usize, iteration: u64, k: u64) -> Result<RolloutReport, TrainError> {
        let params = RolloutParams {
            base_seed: derive_seed(self.config.rollout.base_seed, iteration, k),
            ..self.config.rollout.clone()
        };
        let code = self.tree.nodes()[node_id].code.clone();
        let report = run_rollouts(&code, &self.game, &params, self.executor.as_ref())?;
        let stats = self.tree.update_stats(node_id, &report)?.clone();
        self.metrics.push(MetricsRow {
            iteration,
            node_id,
            heuristic: stats.heuristic,
            attempted: stats.steps_attempted,
            legal: stats.steps_legal,
            exec_failures: stats.exec_failures,
        });
        if stats.heuristic > self.best.1 {
            self.best = (node_id, stats.heuristic);
        }
        let path = node_dir(&self.config.run_dir, node_id).join("rollouts.jsonl");
        let mut lines = String::new();
        for record in &report.records {
            lines.push_str(&serde_json::to_string(record).expect("records serialize"));
            lines.push('\n');
        }
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        file.write_all(lines.as_bytes()).map_err(io_err(&path))?;
        Ok(report)
    }

    /// Runs one iteration. Returns whether another iteration may follow.
    pub fn step(&mut self) -> Result<bool, TrainError> {
        if self.stop_reason.is_some() {
            return Ok(false);
        }
        let iteration = self.iterations_used + 1;
        let selection = SelectionConfig {
            rng_seed: derive_seed(self.config.selection.rng_seed, iteration, 0),
            ..self.config.selection.clone()
        };
        let node_id = self.tree.select_node(&selection)?;
        let report = self.score(node_id, iteration, 0)?;
        info!(iteration, node_id, heuristic = self.tree.nodes()[node_id].stats.heuristic, "scored selected node");

        if self.solved(node_id) {
            self.stop_reason = Some(StopReason::Solved);
        } else {
            let code = self.tree.nodes()[node_id].code.clone();
            let refinement = refine(&code, &report.failures, &self.game, self.config.mode, self.llm.as_ref());
            self.record_refinement(iteration, node_id, refinement)?;
        }

        self.iterations_used = iteration;
        if self.stop_reason.is_none() {
            if iteration >= self.config.iteration_cap() {
                self.stop_reason = Some(StopReason::MaxIterations);
            } else if self.started.elapsed() >= self.config.wall_clock_budget {
                self.stop_reason = Some(StopReason::WallClock);
            }
        }
        self.persist()?;
        Ok(self.stop_reason.is_none())
    }

    fn record_refinement(
        &mut self,
        iteration: u64,
        parent_id: usize,
        refinement: Refinement,
    ) -> Result<(), TrainError> {
        if refinement.prompt.is_some() {
            self.refinement_calls += 1;
        }
        let targets: Vec<GuestFunction> = refinement.targets.functions.iter().copied().collect();
        info!(iteration, parent_id, targets = ?refinement.targets.names(), "refinement targets");
        let prompt = refinement.prompt.unwrap_or_default();
        let response = refinement.response.unwrap_or_default();
        match refinement.code {
            Ok(code) => {
                let child = self.tree.add_child(parent_id, &code, iteration)?;
                self.write_node(child, &prompt, &response)?;
                self.refinements.push(RefinementEntry {
                    iteration,
                    parent_id,
                    targets,
                    child_id: Some(child),
                    error: None,
                });
                self.score(child, iteration, 1)?;
                if self.solved(child) {
                    self.stop_reason = Some(StopReason::Solved);
                }
            }
            Err(e) => {
                warn!(iteration, error = %e, "refinement failed");
                let dir = self.config.run_dir.join("failed").join(iteration.to_string());
                write(&dir.join("prompt.txt"), &prompt)?;
                write(&dir.join("response.txt"), &response)?;
                self.refinements.push(RefinementEntry {
                    iteration,
                    parent_id,
                    targets,
                    child_id: None,
                    error: Some(e.to_string()),
                });
            }
        }
        Ok(())
    }

    fn write_node(&self, node_id: usize, prompt: &str, response: &str) -> Result<(), TrainError> {
        let dir = node_dir(&self.config.run_dir, node_id);
        write(&dir.join("code.txt"), &self.tree.nodes()[node_id].code)?;
        write(&dir.join("prompt.txt"), prompt)?;
        write(&dir.join("response.txt"), response)
    }

    fn persist(&self) -> Result<(), TrainError> {
        let dir = &self.config.run_dir;
        let mut metrics = format!("{METRICS_HEADER}\n");
        for row in &self.metrics {
            metrics.push_str(&row.csv());
            metrics.push('\n');
        }
        write(&dir.join("metrics.csv"), &metrics)?;
        write(&dir.join("report.md"), &self.render_report())?;
        let state = TreeFile {
            game_id: self.config.game_id.clone(),
            mode: self.config.mode,
            iterations_used: self.iterations_used,
            stop_reason: self.stop_reason,
            best_node_id: self.best.0,
            best_heuristic: self.best.1,
            refinement_calls: self.refinement_calls,
            nodes: self
                .tree
                .nodes()
                .iter()
                .map(|n| NodeEntry {
                    node_id: n.node_id,
                    parent_id: n.parent_id,
                    created_at_iteration: n.created_at_iteration,
                    code_file: format!("nodes/{}/code.txt", n.node_id),
                    stats: n.stats.clone(),
                })
                .collect(),
            refinements: self.refinements.clone(),
        };
        // Written last: its presence marks a complete iteration.
        let json = serde_json::to_string_pretty(&state).expect("tree serializes");
        write(&dir.join("tree.json"), &format!("{json}\n"))
    }

    fn render_report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# Training run: {}\n", self.config.game_id);
        let mode = match self.config.mode {
            Mode::Verifier => "verifier",
            Mode::Policy => "policy",
        };
        let stop = match self.stop_reason {
            None => "running",
            Some(StopReason::Solved) => "solved",
            Some(StopReason::MaxIterations) => "iteration cap reached",
            Some(StopReason::WallClock) => "wall-clock budget exhausted",
        };
        let _ = writeln!(out, "- mode: {mode}");
        let _ = writeln!(out, "- status: {stop}");
        let _ = writeln!(out, "- iterations used: {}", self.iterations_used);
        let _ = writeln!(out, "- best node: {} (heuristic {:.4})", self.best.0, self.best.1);
        let failed = self.refinements.iter().filter(|r| r.error.is_some()).count();
        let _ = writeln!(out, "- failed refinements: {failed}\n");
        out.push_str("| node | parent | iteration | attempted | legal | exec failures | heuristic |\n");
        out.push_str("|---:|---:|---:|---:|---:|---:|---:|\n");
        for n in self.tree.nodes() {
            let parent = n.parent_id.map_or("-".to_string(), |p| p.to_string());
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {:.4} |",
                n.node_id,
                parent,
                n.created_at_iteration,
                n.stats.steps_attempted,
                n.stats.steps_legal,
                n.stats.exec_failures,
                n.stats.heuristic
            );
        }
        out
    }
}

/// Starts and finishes a run.
pub fn train(config: TrainConfig) -> Result<RunArtifacts, TrainError> {
    Trainer::new(config)?.train()
}

/// Continues a run to completion; a finished run is returned unchanged.
pub fn resume(run_dir: &Path) -> Result<RunArtifacts, TrainError> {
    Trainer::resume(run_dir)?.train()
}

/// Code of the best node of a finished or interrupted run.
pub fn best_code(run_dir: &Path) -> Result<String, TrainError> {
    let trainer = Trainer::resume(run_dir)?;
    Ok(trainer.tree.nodes()[trainer.best.0].code.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(game: &str, dir: &Path) -> TrainConfig {
        let mut c = TrainConfig::new(game, RefinerConfig::Fixture { oracle_at: 3 }, dir);
        c.rollout.n_envs = 4;
        c.rollout.max_steps = 100;
        c
    }

    #[test]
    fn stub_root_fails_in_every_worker() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Trainer::new(quick("nim", dir.path())).unwrap();
        t.step().unwrap();
        assert_eq!(t.metrics[0].node_id, 0);
        assert_eq!(t.metrics[0].exec_failures, 4);
        assert_eq!(t.tree().len(), 2);
        assert_eq!(
            t.refinements()[0].targets,
            vec![GuestFunction::ProposeAction]
        );
    }

    #[test]
    fn fixture_refiner_solves_quickly() {
        let dir = tempfile::tempdir().unwrap();
        let art = train(quick("frozenlake", dir.path())).unwrap();
        assert_eq!(art.stop_reason, Some(StopReason::Solved));
        assert_eq!(art.best_heuristic, 1.0);
        assert!(art.iterations_used <= 4);
        for f in ["config.json", "tree.json", "metrics.csv", "report.md", "nodes/0/code.txt", "nodes/1/prompt.txt", "nodes/1/response.txt", "nodes/1/rollouts.jsonl"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }

    #[test]
    fn policy_mode_runs_to_the_cap() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = quick("guessthenumber", dir.path());
        c.mode = Mode::Policy;
        c.max_iterations = Some(5);
        c.refiner = RefinerConfig::Scripted {
            responses: vec![fixtures::as_llm_reply(&fixtures::constant_harness("[1]", true)); 5],
        };
        let art = train(c).unwrap();
        assert_eq!(art.stop_reason, Some(StopReason::MaxIterations));
        assert_eq!(art.iterations_used, 5);
        let mut prev = 0.0;
        let mut best = 0.0f64;
        for row in &art.metrics {
            best = best.max(row.heuristic);
            assert!(best >= prev);
            prev = best;
        }
    }

    #[test]
    fn failed_refinements_are_recorded_and_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = quick("nim", dir.path());
        c.max_iterations = Some(2);
        c.refiner = RefinerConfig::Scripted {
            responses: vec!["no code here".into()],
        };
        let art = train(c).unwrap();
        assert_eq!(art.iterations_used, 2);
        let t = Trainer::resume(dir.path()).unwrap();
        assert_eq!(t.tree().len(), 1);
        assert_eq!(t.refinements().len(), 2);
        assert!(t.refinements().iter().all(|r| r.error.is_some()));
        assert!(dir.path().join("failed/1/response.txt").exists());
    }

    #[test]
    fn resume_checks_integrity() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(Trainer::resume(dir.path()), Err(TrainError::Integrity(_))));
        let art = train(quick("nim", dir.path())).unwrap();
        assert_eq!(resume(dir.path()).unwrap(), art);
        assert!(Trainer::new(quick("nim", dir.path())).is_err());
        fs::write(dir.path().join("tree.json"), "{").unwrap();
        assert!(matches!(Trainer::resume(dir.path()), Err(TrainError::Integrity(_))));
    }

    #[test]
    fn config_round_trips_without_run_dir() {
        let c = quick("nim", Path::new("/tmp/x"));
        let json = serde_json::to_string(&c).unwrap();
        assert!(!json.contains("run_dir"));
        let back: TrainConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.rollout, c.rollout);
        assert!(TrainConfig { max_iterations: Some(0), ..c.clone() }.validate().is_err());
    }
}
