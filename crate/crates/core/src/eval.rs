//! Evaluation protocol: legal-action rate, 1P mean reward, 2P win/draw/loss.
//!
//! Two-player schedules are paired: matches `2j` and `2j + 1` share seed
//! `base_seed + j` with the seats swapped, so exchanging the two agents maps
//! (w, d, l) to (l, d, w) exactly for agents that are a pure function of
//! their `(seed, seat)` reset.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envs::{create_env, game_spec, EnvError, Seed};
use crate::executor::Executor;
use crate::fixtures;
use crate::harness::{
    Agent, FirstLegalAgent, HarnessAgent, HarnessMode, LlmAgent, RandomLegalAgent, SequenceAgent,
    TurnRecord,
};
use crate::llm::{HttpClient, LlmClient, LlmConfig, ScriptedClient};
use crate::trainer::{self, ExecutorConfig};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("cannot build agent: {0}")]
    Agent(String),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Turns after which a match is abandoned as a draw; every built-in game
/// ends well before this.
const TURN_LIMIT: u64 = 10_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegalCount {
    pub attempted: u64,
    pub legal: u64,
}

impl LegalCount {
    pub fn rate(self) -> f64 {
        crate::tree::legal_rate(self.legal, self.attempted)
    }
}

/// Plays `steps` agent actions per seed on `seeds` seeded environments,
/// resetting after each finished episode. An illegal action ends that
/// seed's rollout.
pub fn legal_action_rate(
    agent: &mut dyn Agent,
    game_id: &str,
    steps: u64,
    seeds: u64,
    base_seed: u64,
) -> Result<LegalCount, EvalError> {
    if steps == 0 || seeds == 0 {
        return Err(EvalError::Argument("steps and seeds must be positive".into()));
    }
    let mut env = create_env(game_id, false)?;
    let mut count = LegalCount::default();
    for s in 0..seeds {
        let mut episode = 0u64;
        let seed = |episode: u64| base_seed.wrapping_add(s).wrapping_add(episode.wrapping_mul(seeds));
        agent.reset(seed(0), 0);
        let mut obs = env.reset(Seed(seed(0)));
        for _ in 0..steps {
            let out = env.step(&agent.act(&obs))?;
            count.attempted += 1;
            if !out.legal {
                break;
            }
            count.legal += 1;
            if out.done {
                episode += 1;
                agent.reset(seed(episode), 0);
                obs = env.reset(Seed(seed(episode)));
            } else {
                obs = out.observation;
            }
        }
    }
    Ok(count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchOutcome {
    Win,
    Draw,
    Loss,
}

/// One match from the evaluated agent's point of view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub match_index: usize,
    pub seed: u64,
    pub seat: usize,
    pub turns: u64,
    pub reward: f64,
    /// 2P only.
    pub outcome: Option<MatchOutcome>,
    pub actions: LegalCount,
}

fn play_1p(agent: &mut dyn Agent, game_id: &str, match_index: usize, seed: u64) -> Result<MatchRecord, EvalError> {
    let mut env = create_env(game_id, false)?;
    agent.reset(seed, 0);
    let mut obs = env.reset(Seed(seed));
    let mut rec = MatchRecord {
        match_index,
        seed,
        seat: 0,
        turns: 0,
        reward: 0.0,
        outcome: None,
        actions: LegalCount::default(),
    };
    while rec.turns < TURN_LIMIT {
        let out = env.step(&agent.act(&obs))?;
        rec.turns += 1;
        rec.actions.attempted += 1;
        rec.actions.legal += u64::from(out.legal);
        if out.done {
            // Illegal moves score -1, which clamps to the floor.
            rec.reward = out.reward(0).clamp(0.0, 1.0);
            break;
        }
        obs = out.observation;
    }
    Ok(rec)
}

fn play_2p(
    a: &mut dyn Agent,
    b: &mut dyn Agent,
    game_id: &str,
    match_index: usize,
    seed: u64,
    a_seat: usize,
) -> Result<MatchRecord, EvalError> {
    let mut env = create_env(game_id, false)?;
    a.reset(seed, a_seat);
    b.reset(seed, 1 - a_seat);
    let mut obs = env.reset(Seed(seed));
    let mut rec = MatchRecord {
        match_index,
        seed,
        seat: a_seat,
        turns: 0,
        reward: 0.0,
        outcome: Some(MatchOutcome::Draw),
        actions: LegalCount::default(),
    };
    while rec.turns < TURN_LIMIT {
        let a_moves = obs.player_id == a_seat;
        let action = if a_moves { a.act(&obs) } else { b.act(&obs) };
        let out = env.step(&action)?;
        rec.turns += 1;
        if a_moves {
            rec.actions.attempted += 1;
            rec.actions.legal += u64::from(out.legal);
        }
        if out.done {
            rec.reward = out.reward(a_seat);
            rec.outcome = Some(if rec.reward > 0.0 {
                MatchOutcome::Win
            } else if rec.reward < 0.0 {
                MatchOutcome::Loss
            } else {
                MatchOutcome::Draw
            });
            break;
        }
        obs = out.observation;
    }
    Ok(rec)
}

fn require_players(game_id: &str, players: usize) -> Result<(), EvalError> {
    let spec = game_spec(game_id)?;
    if spec.players != players {
        return Err(EvalError::Argument(format!(
            "{game_id} is a {}-player game",
            spec.players
        )));
    }
    Ok(())
}

/// Seed and evaluated-agent seat of 2P match `i`.
pub fn schedule_2p(base_seed: u64, i: usize) -> (u64, usize) {
    (base_seed.wrapping_add((i / 2) as u64), i % 2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnePlayerResult {
    pub mean_reward: f64,
    pub records: Vec<MatchRecord>,
}

/// Match `i` uses seed `base_seed + i`.
pub fn run_matches_1p(
    agent: &mut dyn Agent,
    game_id: &str,
    n: usize,
    base_seed: u64,
) -> Result<OnePlayerResult, EvalError> {
    if n == 0 {
        return Err(EvalError::Argument("at least one match is required".into()));
    }
    require_players(game_id, 1)?;
    let records = (0..n)
        .map(|i| play_1p(agent, game_id, i, base_seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize_1p(records))
}

fn summarize_1p(records: Vec<MatchRecord>) -> OnePlayerResult {
    let mean_reward = records.iter().map(|r| r.reward).sum::<f64>() / records.len() as f64;
    OnePlayerResult {
        mean_reward,
        records,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wdl {
    pub wins: usize,
    pub draws: usize,
    pub losses: usize,
    pub records: Vec<MatchRecord>,
}

impl Wdl {
    pub fn triple(&self) -> (usize, usize, usize) {
        (self.wins, self.draws, self.losses)
    }

    fn from_records(records: Vec<MatchRecord>) -> Wdl {
        let count = |o| records.iter().filter(|r| r.outcome == Some(o)).count();
        Wdl {
            wins: count(MatchOutcome::Win),
            draws: count(MatchOutcome::Draw),
            losses: count(MatchOutcome::Loss),
            records,
        }
    }
}

fn check_2p(game_id: &str, n: usize) -> Result<(), EvalError> {
    if n == 0 || n % 2 == 1 {
        return Err(EvalError::Argument(format!(
            "two-player schedules need a positive even match count, got {n}"
        )));
    }
    require_players(game_id, 2)
}

/// Half the matches with `a` first, half second; counts are `a`'s.
pub fn run_matches_2p(
    a: &mut dyn Agent,
    b: &mut dyn Agent,
    game_id: &str,
    n: usize,
    base_seed: u64,
) -> Result<Wdl, EvalError> {
    check_2p(game_id, n)?;
    let records = (0..n)
        .map(|i| {
            let (seed, seat) = schedule_2p(base_seed, i);
            play_2p(a, b, game_id, i, seed, seat)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Wdl::from_records(records))
}

pub type AgentFactory<'a> = dyn Fn() -> Result<Box<dyn Agent>, EvalError> + Sync + 'a;

/// Runs `play(i, agents)` for every match index on up to `workers` threads,
/// each with its own agents. Results are in index order.
fn pool<T: Send>(
    n: usize,
    workers: usize,
    make: &(dyn Fn() -> Result<Vec<Box<dyn Agent>>, EvalError> + Sync),
    play: &(dyn Fn(usize, &mut [Box<dyn Agent>]) -> Result<T, EvalError> + Sync),
) -> Result<Vec<T>, EvalError> {
    let workers = workers.clamp(1, n.max(1));
    let chunks: Vec<Result<Vec<T>, EvalError>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    let mut agents = make()?;
                    (w..n)
                        .step_by(workers)
                        .map(|i| play(i, &mut agents))
                        .collect::<Result<Vec<T>, EvalError>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("match worker panicked"))
            .collect()
    });
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    for (w, chunk) in chunks.into_iter().enumerate() {
        for (k, item) in chunk?.into_iter().enumerate() {
            slots[w + k * workers] = Some(item);
        }
    }
    Ok(slots.into_iter().map(|s| s.expect("every match ran")).collect())
}

/// [`run_matches_1p`] on a bounded worker pool.
pub fn run_matches_1p_pool(
    make: &AgentFactory,
    game_id: &str,
    n: usize,
    base_seed: u64,
    workers: usize,
) -> Result<OnePlayerResult, EvalError> {
    if n == 0 {
        return Err(EvalError::Argument("at least one match is required".into()));
    }
    require_players(game_id, 1)?;
    let records = pool(n, workers, &|| Ok(vec![make()?]), &|i, agents| {
        play_1p(agents[0].as_mut(), game_id, i, base_seed.wrapping_add(i as u64))
    })?;
    Ok(summarize_1p(records))
}

/// [`run_matches_2p`] on a bounded worker pool.
pub fn run_matches_2p_pool(
    make_a: &AgentFactory,
    make_b: &AgentFactory,
    game_id: &str,
    n: usize,
    base_seed: u64,
    workers: usize,
) -> Result<Wdl, EvalError> {
    check_2p(game_id, n)?;
    let records = pool(n, workers, &|| Ok(vec![make_a()?, make_b()?]), &|i, agents| {
        let (seed, seat) = schedule_2p(base_seed, i);
        let (a, b) = agents.split_at_mut(1);
        play_2p(a[0].as_mut(), b[0].as_mut(), game_id, i, seed, seat)
    })?;
    Ok(Wdl::from_records(records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub game_id: String,
    pub agent: String,
    pub opponent: Option<String>,
    pub matches: usize,
    pub wins: Option<usize>,
    pub draws: Option<usize>,
    pub losses: Option<usize>,
    pub mean_reward: Option<f64>,
    pub legal_action_rate: f64,
    pub records: Vec<MatchRecord>,
}

pub const REPORT_CSV_HEADER: &str =
    "game_id,agent,matches,wins,draws,losses,mean_reward,legal_action_rate";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Percentage with one decimal, halves rounded up.
pub fn percent(num: usize, den: usize) -> String {
    if den == 0 {
        return "-".into();
    }
    let tenths = (num as f64 * 1000.0 / den as f64).round();
    format!("{:.1}%", tenths / 10.0)
}

/// Twenty-cell bar: `#` wins, `=` draws, `.` losses.
pub fn wdl_bar(w: usize, d: usize, l: usize) -> String {
    const WIDTH: f64 = 20.0;
    let n = (w + d + l) as f64;
    if n == 0.0 {
        return String::new();
    }
    let wins = (w as f64 / n * WIDTH).round() as usize;
    let upto_draws = ((w + d) as f64 / n * WIDTH).round() as usize;
    format!(
        "{}{}{}",
        "#".repeat(wins),
        "=".repeat(upto_draws - wins),
        ".".repeat(WIDTH as usize - upto_draws)
    )
}

pub fn render_csv(reports: &[EvalReport]) -> String {
    let mut out = format!("{REPORT_CSV_HEADER}\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.4}",
            csv_field(&r.game_id),
            csv_field(&r.agent),
            r.matches,
            opt(r.wins),
            opt(r.draws),
            opt(r.losses),
            opt(r.mean_reward.map(|m| format!("{m:.4}"))),
            r.legal_action_rate
        );
    }
    out
}

pub fn render_markdown(reports: &[EvalReport]) -> String {
    let mut out = String::from("# Evaluation report\n\n## Two-player games\n\n");
    out.push_str("| game | agent | opponent | matches | W | D | L | win rate | draw rate | loss rate | W/D/L |\n");
    out.push_str("|---|---|---|---:|---:|---:|---:|---:|---:|---:|---|\n");
    for r in reports {
        let (Some(w), Some(d), Some(l)) = (r.wins, r.draws, r.losses) else {
            continue;
        };
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {w} | {d} | {l} | {} | {} | {} | `{}` |",
            r.game_id,
            r.agent,
            r.opponent.as_deref().unwrap_or("-"),
            r.matches,
            percent(w, r.matches),
            percent(d, r.matches),
            percent(l, r.matches),
            wdl_bar(w, d, l)
        );
    }
    out.push_str("\n## One-player games\n\n");
    out.push_str("| game | agent | matches | mean reward | legal action rate |\n");
    out.push_str("|---|---|---:|---:|---:|\n");
    for r in reports {
        if let Some(m) = r.mean_reward {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {m:.4} | {:.4} |",
                r.game_id, r.agent, r.matches, r.legal_action_rate
            );
        }
    }
    out
}

/// Writes report.csv and report.md into `dir`.
pub fn emit_report(reports: &[EvalReport], dir: &Path) -> Result<(PathBuf, PathBuf), EvalError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| EvalError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let csv = dir.join("report.csv");
    let md = dir.join("report.md");
    fs::write(&csv, render_csv(reports)).map_err(io(&csv))?;
    fs::write(&md, render_markdown(reports)).map_err(io(&md))?;
    Ok((csv, md))
}

/// Where a harness agent's code comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeSource {
    /// The built-in oracle fixture for the game under evaluation.
    OracleFixture,
    File(PathBuf),
    /// Best node of a training run directory.
    BestOf(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentSpec {
    Random,
    FirstLegal,
    Sequence { actions: Vec<String> },
    Llm,
    Harness {
        mode: HarnessMode,
        code: CodeSource,
        #[serde(default)]
        label: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LlmSource {
    Scripted { responses: Vec<String> },
    Http(LlmConfig),
}

impl LlmSource {
    pub fn build(&self) -> Result<Arc<dyn LlmClient>, EvalError> {
        Ok(match self {
            LlmSource::Scripted { responses } => Arc::new(ScriptedClient::sequence(responses.clone())),
            LlmSource::Http(cfg) => {
                Arc::new(HttpClient::new(cfg.clone()).map_err(|e| EvalError::Agent(e.to_string()))?)
            }
        })
    }
}

/// An agent spec with its code already loaded.
#[derive(Debug, Clone)]
pub struct ResolvedAgent {
    spec: AgentSpec,
    code: Option<String>,
}

impl ResolvedAgent {
    pub fn resolve(spec: &AgentSpec, game_id: &str) -> Result<Self, EvalError> {
        let code = match spec {
            AgentSpec::Harness { code, .. } => Some(match code {
                CodeSource::OracleFixture => fixtures::oracle_harness(game_id),
                CodeSource::File(path) => fs::read_to_string(path).map_err(|source| EvalError::Io {
                    path: path.clone(),
                    source,
                })?,
                CodeSource::BestOf(dir) => {
                    trainer::best_code(dir).map_err(|e| EvalError::Agent(e.to_string()))?
                }
            }),
            _ => None,
        };
        Ok(ResolvedAgent {
            spec: spec.clone(),
            code,
        })
    }

    pub fn label(&self) -> String {
        match &self.spec {
            AgentSpec::Random => "random".into(),
            AgentSpec::FirstLegal => "first-legal".into(),
            AgentSpec::Sequence { .. } => "sequence".into(),
            AgentSpec::Llm => "llm".into(),
            AgentSpec::Harness { label: Some(l), .. } => l.clone(),
            AgentSpec::Harness { mode, .. } => match mode {
                HarnessMode::ActionVerifier { .. } => "harness-verifier".into(),
                HarnessMode::ActionFilter { .. } => "harness-filter".into(),
                HarnessMode::Policy => "harness-policy".into(),
            },
        }
    }

    pub fn build(
        &self,
        game_id: &str,
        executor: &dyn Executor,
        llm: Option<&Arc<dyn LlmClient>>,
    ) -> Result<Box<dyn Agent>, EvalError> {
        let need_llm = || {
            llm.cloned()
                .ok_or_else(|| EvalError::Agent("this agent needs an `llm` section".into()))
        };
        Ok(match &self.spec {
            AgentSpec::Random => Box::new(RandomLegalAgent::new(game_id)),
            AgentSpec::FirstLegal => Box::new(FirstLegalAgent::new(game_id)),
            AgentSpec::Sequence { actions } => Box::new(SequenceAgent::new(actions.clone())),
            AgentSpec::Llm => Box::new(LlmAgent::new(need_llm()?)),
            AgentSpec::Harness { mode, .. } => {
                let llm = if mode.needs_llm() { Some(need_llm()?) } else { None };
                let session = executor
                    .start_session()
                    .map_err(|e| EvalError::Agent(e.to_string()))?;
                Box::new(
                    HarnessAgent::new(
                        self.label(),
                        *mode,
                        self.code.clone().expect("harness code resolved"),
                        session,
                        llm,
                    )
                    .map_err(|e| EvalError::Agent(e.to_string()))?,
                )
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub game_id: String,
    pub agent: AgentSpec,
    /// 2P only; defaults to a random legal player.
    #[serde(default)]
    pub opponent: Option<AgentSpec>,
    /// Defaults to 20 (1P) or 40 (2P).
    #[serde(default)]
    pub matches: Option<usize>,
}

fn default_steps() -> u64 {
    1000
}

fn default_seeds() -> u64 {
    10
}

fn default_workers() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub run_dir: PathBuf,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_steps")]
    pub legal_rate_steps: u64,
    #[serde(default = "default_seeds")]
    pub legal_rate_seeds: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub executor: ExecutorConfig,
    #[serde(default)]
    pub llm: Option<LlmSource>,
    pub suites: Vec<SuiteSpec>,
}

/// Runs every suite and writes the report files into `config.run_dir`.
pub fn run_eval(config: &EvalConfig) -> Result<Vec<EvalReport>, EvalError> {
    let executor = config.executor.build();
    let llm = config.llm.as_ref().map(LlmSource::build).transpose()?;
    let mut reports = Vec::new();
    for suite in &config.suites {
        reports.push(run_suite(config, suite, executor.as_ref(), llm.as_ref())?);
    }
    emit_report(&reports, &config.run_dir)?;
    Ok(reports)
}

fn run_suite(
    config: &EvalConfig,
    suite: &SuiteSpec,
    executor: &dyn Executor,
    llm: Option<&Arc<dyn LlmClient>>,
) -> Result<EvalReport, EvalError> {
    let game = game_spec(&suite.game_id)?;
    let agent = ResolvedAgent::resolve(&suite.agent, &game.game_id)?;
    let make_agent = || agent.build(&game.game_id, executor, llm);
    let legal = legal_action_rate(
        make_agent()?.as_mut(),
        &game.game_id,
        config.legal_rate_steps,
        config.legal_rate_seeds,
        config.base_seed,
    )?;
    if game.players == 1 {
        let n = suite.matches.unwrap_or(20);
        let result = run_matches_1p_pool(&make_agent, &game.game_id, n, config.base_seed, config.workers)?;
        return Ok(EvalReport {
            game_id: game.game_id,
            agent: agent.label(),
            opponent: None,
            matches: n,
            wins: None,
            draws: None,
            losses: None,
            mean_reward: Some(result.mean_reward),
            legal_action_rate: legal.rate(),
            records: result.records,
        });
    }
    let opponent = ResolvedAgent::resolve(suite.opponent.as_ref().unwrap_or(&AgentSpec::Random), &game.game_id)?;
    let make_opponent = || opponent.build(&game.game_id, executor, llm);
    let n = suite.matches.unwrap_or(40);
    let wdl = run_matches_2p_pool(&make_agent, &make_opponent, &game.game_id, n, config.base_seed, config.workers)?;
    Ok(EvalReport {
        game_id: game.game_id,
        agent: agent.label(),
        opponent: Some(opponent.label()),
        matches: n,
        wins: Some(wdl.wins),
        draws: Some(wdl.draws),
        losses: Some(wdl.losses),
        mean_reward: None,
        legal_action_rate: legal.rate(),
        records: wdl.records,
    })
}

/// One line of a logged match transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub turn: u64,
    pub player_id: usize,
    pub agent: String,
    pub observation: String,
    pub action: String,
    pub legal: bool,
    pub done: bool,
    pub rewards: Vec<f64>,
    pub decision: Option<TurnRecord>,
}

/// Plays one match with one agent per seat, reporting each turn to
/// `on_turn` as it happens.
pub fn play_logged(
    agents: &mut [Box<dyn Agent>],
    game_id: &str,
    seed: u64,
    on_turn: &mut dyn FnMut(&TranscriptLine),
) -> Result<Vec<TranscriptLine>, EvalError> {
    let spec = game_spec(game_id)?;
    if agents.len() != spec.players {
        return Err(EvalError::Argument(format!(
            "{game_id} needs {} agent(s), got {}",
            spec.players,
            agents.len()
        )));
    }
    let mut env = create_env(game_id, false)?;
    for (seat, agent) in agents.iter_mut().enumerate() {
        agent.reset(seed, seat);
    }
    let mut obs = env.reset(Seed(seed));
    let mut lines = Vec::new();
    for turn in 0..TURN_LIMIT {
        let agent = &mut agents[obs.player_id];
        let action = agent.act(&obs);
        let out = env.step(&action)?;
        let line = TranscriptLine {
            turn,
            player_id: obs.player_id,
            agent: agent.name(),
            observation: obs.text.clone(),
            action,
            legal: out.legal,
            done: out.done,
            rewards: out.rewards.clone(),
            decision: agent.transcript().last().cloned(),
        };
        on_turn(&line);
        lines.push(line);
        if out.done {
            break;
        }
        obs = out.observation;
    }
    Ok(lines)
}

/// Human-readable rendering of one transcript line.
pub fn render_turn(line: &TranscriptLine) -> String {
    let mut out = format!(
        "--- turn {} | player {} ({}) ---\n{}",
        line.turn, line.player_id, line.agent, line.observation
    );
    if !out.ends_with('\n') {
        out.push('\n');
    }
    let verdict = if line.legal { "legal" } else { "ILLEGAL" };
    let _ = writeln!(out, "> {} [{verdict}]", line.action);
    if line.done {
        let rewards: Vec<String> = line.rewards.iter().map(|r| format!("{r}")).collect();
        let _ = writeln!(out, "game over; rewards: {}", rewards.join(", "));
    }
    out
}
