//! Parallel training rollouts of one hypothesis.
//!
//! Each worker owns one environment and one guest session. The guest's
//! `propose_action` drives play; `is_legal_action` is asked about every
//! proposal so its verdict can be compared with the environment's. A worker
//! stops at its first illegal move or guest failure, or after `max_steps`.

use std::thread;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::envs::{create_env, EnvError, GameSpec, Seed};
use crate::executor::{ErrorKind, ExecError, Executor, GuestFailure, GuestFunction};
use crate::tree::{trajectory_score, Mode};

#[derive(Debug, Error)]
pub enum RolloutError {
    #[error("executor infrastructure failure: {0}")]
    Executor(#[from] ExecError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("invalid rollout parameters: {0}")]
    Params(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RolloutParams {
    pub n_envs: usize,
    pub max_steps: u64,
    pub mode: Mode,
    pub base_seed: u64,
    pub failure_sample_cap: usize,
}

impl Default for RolloutParams {
    fn default() -> Self {
        RolloutParams {
            n_envs: 10,
            max_steps: 1000,
            mode: Mode::Verifier,
            base_seed: 0,
            failure_sample_cap: 5,
        }
    }
}

impl RolloutParams {
    pub fn validate(&self) -> Result<(), RolloutError> {
        if self.n_envs == 0 || self.max_steps == 0 || self.failure_sample_cap == 0 {
            return Err(RolloutError::Params("all counts must be positive".into()));
        }
        Ok(())
    }

    /// Environment seed for `episode` of worker `env_index`. Distinct for
    /// every (worker, episode) pair.
    pub fn episode_seed(&self, env_index: usize, episode: u64) -> Seed {
        Seed(
            self.base_seed
                .wrapping_add(env_index as u64)
                .wrapping_add(episode.wrapping_mul(self.n_envs as u64)),
        )
    }
}

/// What `is_legal_action` said about the proposed action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GuestVerdict {
    #[serde(rename = "true")]
    Accepted,
    #[serde(rename = "false")]
    Rejected,
    #[serde(rename = "error")]
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvVerdict {
    Legal,
    Illegal,
}

/// One step worth showing to the critic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub env_index: usize,
    pub step_index: u64,
    pub board: String,
    /// Empty when no action was proposed.
    pub action: String,
    pub guest_verdict: GuestVerdict,
    /// `None` when the environment was never stepped.
    pub env_verdict: Option<EnvVerdict>,
    pub error_kind: Option<ErrorKind>,
    /// Function that failed; `None` for load failures.
    pub failed_function: Option<GuestFunction>,
    pub error_message: String,
    #[serde(default)]
    pub traceback: String,
}

impl FailureRecord {
    fn guest_failure(
        env_index: usize,
        step_index: u64,
        board: &str,
        action: &str,
        function: Option<GuestFunction>,
        env_verdict: Option<EnvVerdict>,
        failure: GuestFailure,
    ) -> Self {
        FailureRecord {
            env_index,
            step_index,
            board: board.to_string(),
            action: action.to_string(),
            guest_verdict: GuestVerdict::Error,
            env_verdict,
            error_kind: Some(failure.kind),
            failed_function: function,
            error_message: failure.message,
            traceback: failure.traceback,
        }
    }
}

/// Audit line for one attempted step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub env_index: usize,
    pub step_index: u64,
    pub board_hash: String,
    pub action: String,
    pub guest_verdict: GuestVerdict,
    pub env_verdict: Option<EnvVerdict>,
    pub error_kind: Option<ErrorKind>,
    pub error_message: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RolloutReport {
    pub steps_attempted: u64,
    pub steps_legal: u64,
    pub steps_illegal: u64,
    pub exec_failures: u64,
    /// Number of failure candidates before sampling.
    pub failure_candidates: usize,
    pub failures: Vec<FailureRecord>,
    pub trajectory_heuristics: Vec<f64>,
    pub episodes_completed: u64,
    pub records: Vec<StepRecord>,
}

impl RolloutReport {
    pub fn legal_rate(&self) -> f64 {
        crate::tree::legal_rate(self.steps_legal, self.steps_attempted)
    }
}

pub fn board_hash(board: &str) -> String {
    Sha256::digest(board.as_bytes())
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Default)]
struct WorkerOutcome {
    attempted: u64,
    legal: u64,
    illegal: u64,
    exec_failures: u64,
    candidates: Vec<FailureRecord>,
    trajectories: Vec<f64>,
    episodes: u64,
    records: Vec<StepRecord>,
}

impl WorkerOutcome {
    fn record(
        &mut self,
        env_index: usize,
        step_index: u64,
        board: &str,
        action: &str,
        guest_verdict: GuestVerdict,
        env_verdict: Option<EnvVerdict>,
        error: Option<&GuestFailure>,
    ) {
        self.records.push(StepRecord {
            env_index,
            step_index,
            board_hash: board_hash(board),
            action: action.to_string(),
            guest_verdict,
            env_verdict,
            error_kind: error.map(|e| e.kind),
            error_message: error.map(|e| e.message.clone()),
        });
    }

    fn exec_failure(&mut self, record: FailureRecord, mode: Mode) {
        self.attempted += 1;
        self.exec_failures += 1;
        let failure = GuestFailure {
            kind: record.error_kind.unwrap_or(ErrorKind::ProtocolError),
            message: record.error_message.clone(),
            traceback: String::new(),
        };
        self.record(
            record.env_index,
            record.step_index,
            &record.board,
            &record.action,
            GuestVerdict::Error,
            record.env_verdict,
            Some(&failure),
        );
        self.candidates.push(record);
        if mode == Mode::Policy {
            self.trajectories.push(0.0);
        }
    }
}

fn run_worker(
    env_index: usize,
    code: &str,
    game: &GameSpec,
    params: &RolloutParams,
    executor: &dyn Executor,
) -> Result<WorkerOutcome, RolloutError> {
    let mut session = executor.start_session()?;
    let mut env = create_env(&game.game_id, false)?;
    let mut out = WorkerOutcome::default();
    let mut episode = 0;
    let worker_seed = params.episode_seed(env_index, 0);
    let mut obs = env.reset(worker_seed);

    if let Err(failure) = session.load_code(code, Some(worker_seed.0)) {
        let rec = FailureRecord::guest_failure(env_index, 0, &obs.text, "", None, None, failure);
        out.exec_failure(rec, params.mode);
        return Ok(out);
    }

    for step_index in 0..params.max_steps {
        let board = obs.text.clone();
        let action = match session.propose_action(&board, None) {
            Ok(a) => a,
            Err(failure) => {
                let rec = FailureRecord::guest_failure(
                    env_index,
                    step_index,
                    &board,
                    "",
                    Some(GuestFunction::ProposeAction),
                    None,
                    failure,
                );
                out.exec_failure(rec, params.mode);
                break;
            }
        };
        let verdict = session.is_legal_action(&board, &action);
        let outcome = env.step(&action)?;
        let env_verdict = if outcome.legal {
            EnvVerdict::Legal
        } else {
            EnvVerdict::Illegal
        };

        let verdict = match verdict {
            Ok(v) => v,
            Err(failure) => {
                let rec = FailureRecord::guest_failure(
                    env_index,
                    step_index,
                    &board,
                    &action,
                    Some(GuestFunction::IsLegalAction),
                    Some(env_verdict),
                    failure,
                );
                out.exec_failure(rec, params.mode);
                break;
            }
        };
        let guest_verdict = if verdict {
            GuestVerdict::Accepted
        } else {
            GuestVerdict::Rejected
        };
        out.attempted += 1;
        out.record(env_index, step_index, &board, &action, guest_verdict, Some(env_verdict), None);

        let mismatch = FailureRecord {
            env_index,
            step_index,
            board: board.clone(),
            action: action.clone(),
            guest_verdict,
            env_verdict: Some(env_verdict),
            error_kind: None,
            failed_function: None,
            error_message: String::new(),
            traceback: String::new(),
        };
        if !outcome.legal {
            out.illegal += 1;
            out.candidates.push(FailureRecord {
                error_message: format!("the game rejected `{action}` as an illegal move"),
                ..mismatch
            });
            if params.mode == Mode::Policy {
                out.trajectories.push(trajectory_score(true, 0.0));
            }
            break;
        }
        out.legal += 1;
        if !verdict {
            out.candidates.push(FailureRecord {
                error_message: format!(
                    "is_legal_action returned False but the game accepted `{action}`"
                ),
                ..mismatch
            });
        }
        if outcome.done {
            out.episodes += 1;
            if params.mode == Mode::Policy {
                let reward = outcome.reward(0).clamp(0.0, 1.0);
                out.trajectories.push(trajectory_score(false, reward));
            }
            episode += 1;
            obs = env.reset(params.episode_seed(env_index, episode));
        } else {
            obs = outcome.observation;
        }
    }
    Ok(out)
}

/// Rolls `code` out on `params.n_envs` parallel environments and aggregates
/// the evidence. Guest failures are part of the report; only executor
/// infrastructure problems are errors.
pub fn run_rollouts(
    code: &str,
    game: &GameSpec,
    params: &RolloutParams,
    executor: &dyn Executor,
) -> Result<RolloutReport, RolloutError> {
    params.validate()?;
    if code.trim().is_empty() {
        return Err(RolloutError::Params("code is empty".into()));
    }
    if params.mode == Mode::Policy && game.players != 1 {
        return Err(RolloutError::Params(
            "policy-mode rollouts need a single-player game".into(),
        ));
    }
    let outcomes: Vec<Result<WorkerOutcome, RolloutError>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..params.n_envs)
            .map(|i| scope.spawn(move || run_worker(i, code, game, params, executor)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("rollout worker panicked"))
            .collect()
    });

    let mut report = RolloutReport::default();
    let mut candidates = Vec::new();
    for outcome in outcomes {
        let o = outcome?;
        report.steps_attempted += o.attempted;
        report.steps_legal += o.legal;
        report.steps_illegal += o.illegal;
        report.exec_failures += o.exec_failures;
        report.trajectory_heuristics.extend(o.trajectories);
        report.episodes_completed += o.episodes;
        report.records.extend(o.records);
        candidates.extend(o.candidates);
    }
    report.failure_candidates = candidates.len();
    report.failures = sample_failures(&candidates, params.failure_sample_cap, params.base_seed);
    Ok(report)
}

/// Uniform sample without replacement of at most `cap` records, returned in
/// (env_index, step_index) order.
pub fn sample_failures(candidates: &[FailureRecord], cap: usize, rng_seed: u64) -> Vec<FailureRecord> {
    let mut ordered: Vec<&FailureRecord> = candidates.iter().collect();
    ordered.sort_by_key(|r| (r.env_index, r.step_index));
    if ordered.len() <= cap {
        return ordered.into_iter().cloned().collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut picked = index::sample(&mut rng, ordered.len(), cap).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| ordered[i].clone()).collect()
}
