//! Inference-time use of a learned harness, and the agents evaluation plays.
//!
//! Three modes wrap a loaded guest session: the model proposes and the guest
//! verifies, the guest proposes candidates and the model picks, or the guest
//! plays alone.

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::debug;

use crate::board;
use crate::envs::{first_bracket_token, strip_hints, Observation};
use crate::executor::{splitmix64, GuestFailure, GuestSession};
use crate::llm::{build_policy_prompt, parse_move, prompt_hash, LlmClient, LlmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HarnessMode {
    ActionVerifier { retry_budget: u32 },
    ActionFilter { filter_samples: u32 },
    Policy,
}

impl HarnessMode {
    pub fn action_verifier() -> Self {
        HarnessMode::ActionVerifier { retry_budget: 4 }
    }

    pub fn action_filter() -> Self {
        HarnessMode::ActionFilter { filter_samples: 16 }
    }

    pub fn needs_llm(self) -> bool {
        !matches!(self, HarnessMode::Policy)
    }

    pub fn validate(self) -> Result<(), HarnessError> {
        match self {
            HarnessMode::ActionVerifier { retry_budget: 0 }
            | HarnessMode::ActionFilter { filter_samples: 0 } => {
                Err(HarnessError::InvalidMode("budgets must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("guest call failed: {0}")]
    Guest(GuestFailure),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("every guest proposal failed; last error: {0}")]
    NoCandidates(GuestFailure),
    #[error("invalid harness mode: {0}")]
    InvalidMode(String),
}

pub fn illegal_warning(action: &str) -> String {
    format!("Your previous move {action} was an illegal action. Choose a different, legal move.")
}

/// One decision, as written to a match transcript.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn: u64,
    pub player_id: usize,
    pub prompt_hashes: Vec<String>,
    pub proposals: Vec<String>,
    /// Guest `is_legal_action` verdict per proposal; `None` if not asked or
    /// the call failed.
    pub verdicts: Vec<Option<bool>>,
    pub emitted: String,
    /// The action came from a fallback rather than the primary path.
    pub fallback: bool,
    pub error: Option<String>,
}

const NO_MOVE: &str = "(no move)";

/// Model proposes, guest `is_legal_action` gates. After `retry_budget`
/// rejections the guest's own proposal is played.
pub fn act_verifier(
    session: &mut dyn GuestSession,
    llm: &dyn LlmClient,
    observation: &str,
    player_id: usize,
    retry_budget: u32,
) -> Result<TurnRecord, HarnessError> {
    let mut rec = TurnRecord {
        player_id,
        ..TurnRecord::default()
    };
    let base = build_policy_prompt(player_id, observation);
    let mut warnings = String::new();
    for _ in 0..retry_budget {
        let prompt = format!("{base}{warnings}");
        rec.prompt_hashes.push(prompt_hash(&prompt));
        let reply = llm.chat(&prompt)?.response;
        let action = parse_move(&reply)
            .ok()
            .or_else(|| first_bracket_token(&reply).map(str::to_string))
            .unwrap_or_default();
        let verdict = if action.is_empty() {
            None
        } else {
            session.is_legal_action(observation, &action).ok()
        };
        rec.verdicts.push(verdict);
        if verdict == Some(true) {
            rec.emitted = action.clone();
            rec.proposals.push(action);
            return Ok(rec);
        }
        let named = if action.is_empty() { NO_MOVE } else { &action };
        warnings.push('\n');
        warnings.push_str(&illegal_warning(named));
        warnings.push('\n');
        rec.proposals.push(action);
    }
    let action = session
        .propose_action(observation, None)
        .map_err(HarnessError::Guest)?;
    debug!(%action, "verifier retries exhausted; playing the guest proposal");
    rec.emitted = action;
    rec.fallback = true;
    Ok(rec)
}

/// Candidate list appended to the observation in filter mode.
pub fn filter_observation(observation: &str, candidates: &[String]) -> String {
    let mut text = observation.trim_end_matches('\n').to_string();
    text.push_str("\n\nCandidate moves (choose exactly one):\n");
    for (i, c) in candidates.iter().enumerate() {
        text.push_str(&format!("{}. {c}\n", i + 1));
    }
    text
}

/// Guest proposes `filter_samples` times with distinct seeds; the model
/// picks among the distinct proposals.
pub fn act_filter(
    session: &mut dyn GuestSession,
    llm: &dyn LlmClient,
    observation: &str,
    player_id: usize,
    filter_samples: u32,
    rng: &mut dyn rand::RngCore,
) -> Result<TurnRecord, HarnessError> {
    let mut rec = TurnRecord {
        player_id,
        ..TurnRecord::default()
    };
    let seed_base = rng.next_u64();
    let mut last_failure = None;
    for k in 0..u64::from(filter_samples) {
        match session.propose_action(observation, Some(splitmix64(seed_base.wrapping_add(k)))) {
            Ok(a) => {
                if !rec.proposals.contains(&a) {
                    rec.proposals.push(a);
                }
            }
            Err(f) => last_failure = Some(f),
        }
    }
    if rec.proposals.is_empty() {
        return Err(HarnessError::NoCandidates(
            last_failure.expect("at least one sample was drawn"),
        ));
    }
    if rec.proposals.len() == 1 {
        rec.emitted = rec.proposals[0].clone();
        return Ok(rec);
    }
    let prompt = build_policy_prompt(player_id, &filter_observation(observation, &rec.proposals));
    rec.prompt_hashes.push(prompt_hash(&prompt));
    let choice = llm.chat(&prompt).ok().and_then(|ex| parse_move(&ex.response).ok());
    match choice.filter(|c| rec.proposals.contains(c)) {
        Some(c) => rec.emitted = c,
        None => {
            rec.emitted = rec.proposals[rng.random_range(0..rec.proposals.len())].clone();
            rec.fallback = true;
        }
    }
    Ok(rec)
}

/// The guest plays alone; no model call is made.
pub fn act_policy(session: &mut dyn GuestSession, observation: &str) -> Result<String, HarnessError> {
    session
        .propose_action(observation, None)
        .map_err(HarnessError::Guest)
}

/// A player in evaluation matches.
pub trait Agent: Send {
    fn name(&self) -> String;
    /// Prepares for a new match; `seat` is the player index this agent holds.
    fn reset(&mut self, seed: u64, seat: usize);
    /// Reply for the current observation. Failures yield an unplayable reply,
    /// which the environment scores as an illegal move.
    fn act(&mut self, obs: &Observation) -> String;
    /// Decisions since the last reset, when the agent records them.
    fn transcript(&self) -> &[TurnRecord] {
        &[]
    }
}

fn agent_rng(seed: u64, seat: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(seat as u64)))
}

/// Uniformly random legal moves, read from the board text.
pub struct RandomLegalAgent {
    game_id: String,
    rng: ChaCha8Rng,
}

impl RandomLegalAgent {
    pub fn new(game_id: &str) -> Self {
        RandomLegalAgent {
            game_id: game_id.to_string(),
            rng: agent_rng(0, 0),
        }
    }
}

impl Agent for RandomLegalAgent {
    fn name(&self) -> String {
        "random".into()
    }

    fn reset(&mut self, seed: u64, seat: usize) {
        self.rng = agent_rng(seed, seat);
    }

    fn act(&mut self, obs: &Observation) -> String {
        board::legal_actions(&self.game_id, &strip_hints(&obs.text))
            .ok()
            .and_then(|moves| moves.choose(&mut self.rng).cloned())
            .unwrap_or_default()
    }
}

/// Always plays the first legal move in board order.
pub struct FirstLegalAgent {
    game_id: String,
}

impl FirstLegalAgent {
    pub fn new(game_id: &str) -> Self {
        FirstLegalAgent {
            game_id: game_id.to_string(),
        }
    }
}

impl Agent for FirstLegalAgent {
    fn name(&self) -> String {
        "first-legal".into()
    }

    fn reset(&mut self, _seed: u64, _seat: usize) {}

    fn act(&mut self, obs: &Observation) -> String {
        board::legal_actions(&self.game_id, &strip_hints(&obs.text))
            .ok()
            .and_then(|m| m.into_iter().next())
            .unwrap_or_default()
    }
}

/// Replays a fixed list of replies, cycling; restarts at each reset.
pub struct SequenceAgent {
    replies: Vec<String>,
    cursor: usize,
}

impl SequenceAgent {
    pub fn new(replies: Vec<String>) -> Self {
        SequenceAgent { replies, cursor: 0 }
    }
}

impl Agent for SequenceAgent {
    fn name(&self) -> String {
        "sequence".into()
    }

    fn reset(&mut self, _seed: u64, _seat: usize) {
        self.cursor = 0;
    }

    fn act(&mut self, _obs: &Observation) -> String {
        if self.replies.is_empty() {
            return String::new();
        }
        let reply = self.replies[self.cursor % self.replies.len()].clone();
        self.cursor += 1;
        reply
    }
}

/// The model plays alone from the game-playing prompt.
pub struct LlmAgent {
    llm: Arc<dyn LlmClient>,
}

impl LlmAgent {
    pub fn new(llm: Arc<dyn LlmClient>) -> Self {
        LlmAgent { llm }
    }
}

impl Agent for LlmAgent {
    fn name(&self) -> String {
        "llm".into()
    }

    fn reset(&mut self, _seed: u64, _seat: usize) {}

    fn act(&mut self, obs: &Observation) -> String {
        self.llm
            .chat(&build_policy_prompt(obs.player_id, &obs.text))
            .ok()
            .and_then(|ex| parse_move(&ex.response).ok())
            .unwrap_or_default()
    }
}

/// A loaded harness in one of the three modes.
pub struct HarnessAgent {
    label: String,
    mode: HarnessMode,
    code: String,
    session: Box<dyn GuestSession>,
    llm: Option<Arc<dyn LlmClient>>,
    rng: ChaCha8Rng,
    turns: Vec<TurnRecord>,
}

impl HarnessAgent {
    pub fn new(
        label: impl Into<String>,
        mode: HarnessMode,
        code: String,
        session: Box<dyn GuestSession>,
        llm: Option<Arc<dyn LlmClient>>,
    ) -> Result<Self, HarnessError> {
        mode.validate()?;
        if mode.needs_llm() && llm.is_none() {
            return Err(HarnessError::InvalidMode(
                "this mode needs a language model client".into(),
            ));
        }
        let mut agent = HarnessAgent {
            label: label.into(),
            mode,
            code,
            session,
            llm,
            rng: agent_rng(0, 0),
            turns: Vec::new(),
        };
        agent
            .session
            .load_code(&agent.code, Some(0))
            .map_err(HarnessError::Guest)?;
        Ok(agent)
    }

    fn decide(&mut self, obs: &Observation) -> Result<TurnRecord, HarnessError> {
        match self.mode {
            HarnessMode::Policy => {
                let action = act_policy(self.session.as_mut(), &obs.text)?;
                Ok(TurnRecord {
                    player_id: obs.player_id,
                    proposals: vec![action.clone()],
                    emitted: action,
                    ..TurnRecord::default()
                })
            }
            HarnessMode::ActionVerifier { retry_budget } => {
                let llm = self.llm.as_deref().expect("checked at construction");
                act_verifier(self.session.as_mut(), llm, &obs.text, obs.player_id, retry_budget)
            }
            HarnessMode::ActionFilter { filter_samples } => {
                let llm = self.llm.as_deref().expect("checked at construction");
                act_filter(
                    self.session.as_mut(),
                    llm,
                    &obs.text,
                    obs.player_id,
                    filter_samples,
                    &mut self.rng,
                )
            }
        }
    }
}

impl Agent for HarnessAgent {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn reset(&mut self, seed: u64, seat: usize) {
        self.rng = agent_rng(seed, seat);
        self.turns.clear();
        let guest_seed = self.rng.random::<u64>() >> 1;
        if let Err(f) = self.session.load_code(&self.code, Some(guest_seed)) {
            debug!(error = %f, "harness reload failed");
        }
    }

    fn act(&mut self, obs: &Observation) -> String {
        let turn = self.turns.len() as u64;
        let mut rec = match self.decide(obs) {
            Ok(rec) => rec,
            Err(e) => TurnRecord {
                player_id: obs.player_id,
                error: Some(e.to_string()),
                ..TurnRecord::default()
            },
        };
        rec.turn = turn;
        let emitted = rec.emitted.clone();
        self.turns.push(rec);
        emitted
    }

    fn transcript(&self) -> &[TurnRecord] {
        &self.turns
    }
}
