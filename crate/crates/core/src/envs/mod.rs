//! Seedable text-game environments with exact legal-action oracles.
//!
//! Every game renders its state as plain text and always appends a
//! `Valid moves:` hint line. [`EnvHandle`] removes that line with
//! [`strip_hints`] unless hints were requested, so training observations
//! never reveal the legal set.

mod frozenlake;
mod guess;
mod hanoi;
mod minesweeper;
mod nim;
mod tictactoe;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use frozenlake::FrozenLake;
pub use guess::GuessTheNumber;
pub use hanoi::TowerOfHanoi;
pub use minesweeper::Minesweeper;
pub use nim::Nim;
pub use tictactoe::TicTacToe;

/// Line prefixes that mark a legal-move hint in an observation.
pub const HINT_MARKERS: [&str; 2] = ["Valid moves:", "Available Moves:"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("unknown game id `{0}`")]
    UnknownGame(String),
    #[error("environment is terminal; call reset first")]
    Terminal,
    #[error("environment has not been reset")]
    NotStarted,
}

/// Static description of a registered game.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameSpec {
    pub game_id: String,
    pub players: usize,
    pub description: String,
    pub action_space_description: String,
    pub hints_enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub text: String,
    pub player_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub legal: bool,
    /// One entry per player; all zero until the episode ends.
    pub rewards: Vec<f64>,
    pub done: bool,
    pub observation: Observation,
}

impl StepOutcome {
    pub fn reward(&self, player: usize) -> f64 {
        self.rewards.get(player).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Seed(pub u64);

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Rules of one game. Implementations render observations with the hint
/// line included; stripping is the handle's job.
pub trait Game: Send + Sync {
    fn players(&self) -> usize;
    fn reset(&mut self, seed: Seed);
    fn is_started(&self) -> bool;
    fn is_terminal(&self) -> bool;
    fn current_player(&self) -> usize;
    /// Full observation text for the player to act, hint line included.
    fn render(&self) -> String;
    /// Applies an already-extracted action token. Returns `None` when the
    /// token is not a legal move in the current state.
    fn apply(&mut self, token: &str) -> Option<Vec<f64>>;
    /// Enumerates legal moves straight from the rules.
    fn legal_moves(&self) -> Vec<String>;
    /// A finite superset of well-formed tokens used for brute-force
    /// cross-checks of `legal_moves`.
    fn candidate_moves(&self) -> Vec<String>;
    fn box_clone(&self) -> Box<dyn Game>;
}

impl Clone for Box<dyn Game> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

/// Returns the contents of the first `[...]` token in `reply`, brackets
/// included.
pub fn first_bracket_token(reply: &str) -> Option<&str> {
    let start = reply.find('[')?;
    let end = reply[start..].find(']')? + start;
    Some(&reply[start..=end])
}

/// Splits a bracketed token into its whitespace separated parts.
pub(crate) fn token_parts(token: &str) -> Option<Vec<&str>> {
    let inner = token.strip_prefix('[')?.strip_suffix(']')?;
    Some(inner.split(' ').collect())
}

/// Parses a canonical decimal (no sign, no leading zeros).
pub(crate) fn parse_canonical(part: &str) -> Option<usize> {
    let n: usize = part.parse().ok()?;
    (n.to_string() == part).then_some(n)
}

/// Parses a canonical `[a b]` token.
pub(crate) fn parse_pair(token: &str) -> Option<(usize, usize)> {
    match token_parts(token)?.as_slice() {
        [a, b] => Some((parse_canonical(a)?, parse_canonical(b)?)),
        _ => None,
    }
}

pub(crate) fn hint_line(moves: &[String]) -> String {
    format!("Valid moves: {}", moves.join(", "))
}

/// Removes every line that starts with a hint marker. All other bytes,
/// including line terminators, are preserved.
pub fn strip_hints(text: &str) -> String {
    text.split_inclusive('\n')
        .filter(|line| !HINT_MARKERS.iter().any(|m| line.starts_with(m)))
        .collect()
}

/// A live environment bound to one game.
#[derive(Clone)]
pub struct EnvHandle {
    spec: GameSpec,
    make: fn() -> Box<dyn Game>,
    game: Box<dyn Game>,
}

impl fmt::Debug for EnvHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EnvHandle")
            .field("game_id", &self.spec.game_id)
            .field("started", &self.game.is_started())
            .field("terminal", &self.game.is_terminal())
            .finish()
    }
}

impl EnvHandle {
    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }

    pub fn players(&self) -> usize {
        self.game.players()
    }

    pub fn is_terminal(&self) -> bool {
        self.game.is_terminal()
    }

    pub fn reset(&mut self, seed: Seed) -> Observation {
        self.game = (self.make)();
        self.game.reset(seed);
        self.observation()
    }

    pub fn observation(&self) -> Observation {
        let text = self.game.render();
        let text = if self.spec.hints_enabled {
            text
        } else {
            strip_hints(&text)
        };
        Observation {
            text,
            player_id: self.game.current_player(),
        }
    }

    /// Plays `action`, an arbitrary agent reply whose first bracketed token
    /// is the move. Unparseable or rule-breaking replies end the episode
    /// with -1 for the acting player (and +1 for the opponent in 2P games).
    pub fn step(&mut self, action: &str) -> Result<StepOutcome, EnvError> {
        if !self.game.is_started() {
            return Err(EnvError::NotStarted);
        }
        if self.game.is_terminal() {
            return Err(EnvError::Terminal);
        }
        let actor = self.game.current_player();
        let applied = first_bracket_token(action).and_then(|t| self.game.apply(t));
        match applied {
            Some(rewards) => Ok(StepOutcome {
                legal: true,
                done: self.game.is_terminal(),
                rewards,
                observation: self.observation(),
            }),
            None => {
                let players = self.game.players();
                let mut rewards = vec![0.0; players];
                rewards[actor] = -1.0;
                if players == 2 {
                    rewards[1 - actor] = 1.0;
                }
                self.game = Box::new(Forfeited {
                    inner: self.game.clone(),
                });
                Ok(StepOutcome {
                    legal: false,
                    done: true,
                    rewards,
                    observation: self.observation(),
                })
            }
        }
    }

    /// The exact set of canonical actions `step` would accept.
    pub fn oracle_legal_actions(&self) -> Result<BTreeSet<String>, EnvError> {
        if !self.game.is_started() {
            return Err(EnvError::NotStarted);
        }
        if self.game.is_terminal() {
            return Err(EnvError::Terminal);
        }
        Ok(self.game.legal_moves().into_iter().collect())
    }

    /// Well-formed candidate tokens, a superset of the legal set.
    pub fn candidate_actions(&self) -> Vec<String> {
        self.game.candidate_moves()
    }

    /// Legality of `action` in the current state, judged by stepping a clone.
    pub fn would_accept(&self, action: &str) -> bool {
        let mut probe = self.clone();
        probe.step(action).map(|o| o.legal).unwrap_or(false)
    }
}

/// Terminal wrapper installed after an illegal move so the handle reports
/// a finished episode while still rendering the last position.
#[derive(Clone)]
struct Forfeited {
    inner: Box<dyn Game>,
}

impl Game for Forfeited {
    fn players(&self) -> usize {
        self.inner.players()
    }
    fn reset(&mut self, seed: Seed) {
        self.inner.reset(seed)
    }
    fn is_started(&self) -> bool {
        true
    }
    fn is_terminal(&self) -> bool {
        true
    }
    fn current_player(&self) -> usize {
        self.inner.current_player()
    }
    fn render(&self) -> String {
        self.inner.render()
    }
    fn apply(&mut self, _token: &str) -> Option<Vec<f64>> {
        None
    }
    fn legal_moves(&self) -> Vec<String> {
        Vec::new()
    }
    fn candidate_moves(&self) -> Vec<String> {
        self.inner.candidate_moves()
    }
    fn box_clone(&self) -> Box<dyn Game> {
        Box::new(self.clone())
    }
}

struct Entry {
    game_id: &'static str,
    players: usize,
    description: &'static str,
    action_space: &'static str,
    make: fn() -> Box<dyn Game>,
}

const REGISTRY: &[Entry] = &[
    Entry {
        game_id: "guessthenumber",
        players: 1,
        description: "A secret integer between 1 and 20 is drawn at the start of the game. \
You have 10 guesses. After each wrong guess you are told whether the secret is higher or lower. \
Reward is 1 if you find the secret within 10 guesses, otherwise 0.",
        action_space: "A guess is an integer between 1 and 20 inclusive, written in square brackets, e.g. [10]. \
Anything else is an illegal action.",
        make: || Box::new(GuessTheNumber::default()),
    },
    Entry {
        game_id: "towerofhanoi",
        players: 1,
        description: "Tower of Hanoi with three pegs A, B, C and three disks that start on peg A. \
Move one top disk at a time; a disk may never be placed on a smaller disk. \
Reward is 1 if all disks reach peg C within 100 moves, otherwise 0.",
        action_space: "A move names the source peg and the target peg in square brackets, e.g. [A C]. \
The source peg must be non-empty and the target peg must be empty or hold a larger top disk.",
        make: || Box::new(TowerOfHanoi::default()),
    },
    Entry {
        game_id: "frozenlake",
        players: 1,
        description: "Walk across a fixed 4x4 frozen lake from the start S to the goal G without \
stepping into a hole H. Movement is deterministic. Reward is 1 at the goal and 0 in a hole \
or after 100 moves.",
        action_space: "One of [up], [down], [left], [right]. Moving off the edge of the grid is illegal.",
        make: || Box::new(FrozenLake::default()),
    },
    Entry {
        game_id: "minesweeper-small",
        players: 1,
        description: "Minesweeper on a 5x5 grid with 3 hidden mines. The first revealed cell is always safe. \
Revealed cells show the number of adjacent mines and zero cells open their neighbours. \
The game ends on a mine or when every safe cell is revealed; reward is the fraction of safe cells revealed.",
        action_space: "Reveal a cell with its row and column in square brackets, e.g. [2 3], \
rows and columns numbered 0 to 4. Only unrevealed cells may be revealed.",
        make: || Box::new(Minesweeper::default()),
    },
    Entry {
        game_id: "tictactoe",
        players: 2,
        description: "Two players take turns marking cells of a 3x3 grid; player 0 plays X and player 1 plays O. \
Three marks in a row, column or diagonal win. A full board without a line is a draw.",
        action_space: "Mark an empty cell with its row and column in square brackets, e.g. [1 1], \
rows and columns numbered 0 to 2.",
        make: || Box::new(TicTacToe::default()),
    },
    Entry {
        game_id: "nim",
        players: 2,
        description: "Normal-play Nim with three heaps of 3, 4 and 5 objects. Players alternate removing \
any positive number of objects from a single heap. The player who takes the last object wins.",
        action_space: "Name the heap index (0 to 2) and the amount to take in square brackets, e.g. [2 3]. \
The amount must be between 1 and the current heap size.",
        make: || Box::new(Nim::default()),
    },
];

/// Read-only catalogue of the built-in games.
pub fn registry() -> Vec<GameSpec> {
    REGISTRY.iter().map(|e| spec_of(e, false)).collect()
}

fn spec_of(entry: &Entry, hints_enabled: bool) -> GameSpec {
    GameSpec {
        game_id: entry.game_id.to_string(),
        players: entry.players,
        description: entry.description.to_string(),
        action_space_description: entry.action_space.to_string(),
        hints_enabled,
    }
}

pub fn game_spec(game_id: &str) -> Result<GameSpec, EnvError> {
    REGISTRY
        .iter()
        .find(|e| e.game_id == game_id)
        .map(|e| spec_of(e, false))
        .ok_or_else(|| EnvError::UnknownGame(game_id.to_string()))
}

/// Creates an unstarted environment for a registered game.
pub fn create_env(game_id: &str, hints_enabled: bool) -> Result<EnvHandle, EnvError> {
    let entry = REGISTRY
        .iter()
        .find(|e| e.game_id == game_id)
        .ok_or_else(|| EnvError::UnknownGame(game_id.to_string()))?;
    Ok(EnvHandle {
        spec: spec_of(entry, hints_enabled),
        make: entry.make,
        game: (entry.make)(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const CHESS_ORIGINAL: &str = "[GAME] You are playing White in a game of Chess.
 Make your moves in UCI format enclosed in square brackets (e.g., [e2e4]).
[GAME] Current board:
   +-----------------+
 8 | r n b q k b n r |
 7 | p p p p p p p p |
 6 | . . . . . . . . |
 5 | . . . . . . . . |
 4 | . . . . . . . . |
 3 | . . . . . . . . |
 2 | P P P P P P P P |
 1 | R N B Q K B N R |
   +-----------------+
    a b c d e f g h
Valid moves: [g1h3], [g1f3], [b1c3], [b1a3], [h2h3], [g2g3], [f2f3], [e2e3], [d2d3], [c2c3], [b2b3], [a2a3], [h2h4], [g2g4], [f2f4], [e2e4], [d2d4], [c2c4], [b2b4], [a2a4]
";

    const CHESS_MODIFIED: &str = "[GAME] You are playing White in a game of Chess.
 Make your moves in UCI format enclosed in square brackets (e.g., [e2e4]).
[GAME] Current board:
   +-----------------+
 8 | r n b q k b n r |
 7 | p p p p p p p p |
 6 | . . . . . . . . |
 5 | . . . . . . . . |
 4 | . . . . . . . . |
 3 | . . . . . . . . |
 2 | P P P P P P P P |
 1 | R N B Q K B N R |
   +-----------------+
    a b c d e f g h
";

    #[test]
    fn strips_chess_valid_moves_line() {
        assert_eq!(strip_hints(CHESS_ORIGINAL), CHESS_MODIFIED);
    }

    #[test]
    fn strip_without_markers_is_identity() {
        let text = "board\n. . .\nmoves: none\n";
        assert_eq!(strip_hints(text), text);
        assert_eq!(strip_hints(""), "");
        // Markers only count at the start of a line.
        let inline = "see Valid moves: [a]\n";
        assert_eq!(strip_hints(inline), inline);
    }

    #[test]
    fn strips_available_moves_without_trailing_newline() {
        assert_eq!(strip_hints("a\nAvailable Moves: [1]"), "a\n");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn strip_hints_is_idempotent(lines in proptest::collection::vec(
            prop_oneof![
                "[ -~]{0,20}",
                "Valid moves: [ -~]{0,10}",
                "Available Moves: [ -~]{0,10}",
                Just(String::new()),
            ], 0..8), trailing in any::<bool>()) {
            let mut text = lines.join("\n");
            if trailing { text.push('\n'); }
            let once = strip_hints(&text);
            prop_assert_eq!(strip_hints(&once), once.clone());
            for line in once.lines() {
                prop_assert!(!HINT_MARKERS.iter().any(|m| line.starts_with(m)));
            }
        }
    }

    #[test]
    fn create_env_lookups() {
        let env = create_env("tictactoe", false).unwrap();
        assert_eq!(env.players(), 2);
        assert_eq!(
            create_env("chess", false).unwrap_err(),
            EnvError::UnknownGame("chess".into())
        );
        let mut hinted = create_env("guessthenumber", true).unwrap();
        let obs = hinted.reset(Seed(1));
        assert!(obs.text.lines().any(|l| l.starts_with("Valid moves:")));
    }

    #[test]
    fn registry_specs_are_well_formed() {
        let specs = registry();
        assert_eq!(specs.len(), 6);
        let ids: BTreeSet<_> = specs.iter().map(|s| s.game_id.clone()).collect();
        assert_eq!(ids.len(), 6);
        for s in &specs {
            assert!(s.players == 1 || s.players == 2);
            assert!(!s.description.is_empty());
            assert!(!s.action_space_description.is_empty());
        }
    }

    #[test]
    fn step_before_reset_and_after_terminal_are_usage_errors() {
        let mut env = create_env("nim", false).unwrap();
        assert_eq!(env.step("[0 1]").unwrap_err(), EnvError::NotStarted);
        env.reset(Seed(0));
        let out = env.step("garbage").unwrap();
        assert!(!out.legal && out.done);
        assert_eq!(out.rewards, vec![-1.0, 1.0]);
        assert_eq!(env.step("[0 1]").unwrap_err(), EnvError::Terminal);
        assert_eq!(env.oracle_legal_actions().unwrap_err(), EnvError::Terminal);
    }

    #[test]
    fn first_bracket_token_takes_the_first() {
        assert_eq!(first_bracket_token("I play [0 1] not [2 2]"), Some("[0 1]"));
        assert_eq!(first_bracket_token("none"), None);
        assert_eq!(first_bracket_token("open [ only"), None);
    }

    /// Plays random legal moves and cross-checks the oracle against trial
    /// stepping of every candidate on a clone, plus the hint-free invariant.
    fn cross_check(game_id: &str, states: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut env = create_env(game_id, false).unwrap();
        let mut episode = 0;
        env.reset(Seed(seed));
        let mut checked = 0;
        while checked < states {
            if env.is_terminal() {
                episode += 1;
                env.reset(Seed(seed + episode));
                continue;
            }
            let oracle = env.oracle_legal_actions().unwrap();
            let brute: BTreeSet<String> = env
                .candidate_actions()
                .into_iter()
                .filter(|a| env.would_accept(a))
                .collect();
            assert_eq!(oracle, brute, "{game_id} state {checked}");
            assert!(!env
                .observation()
                .text
                .lines()
                .any(|l| HINT_MARKERS.iter().any(|m| l.starts_with(m))));
            checked += 1;
            let moves: Vec<_> = oracle.into_iter().collect();
            let pick = &moves[rng.random_range(0..moves.len())];
            let out = env.step(pick).unwrap();
            assert!(out.legal);
        }
    }

    #[test]
    fn oracle_matches_trial_stepping_on_every_game() {
        for spec in registry() {
            cross_check(&spec.game_id, 200, 17);
        }
    }

    #[test]
    fn illegal_step_terminates_everywhere() {
        for spec in registry() {
            let mut env = create_env(&spec.game_id, false).unwrap();
            env.reset(Seed(3));
            let out = env.step("[999]").unwrap();
            assert!(!out.legal);
            assert!(out.done);
            assert_eq!(out.reward(0), -1.0);
        }
    }

    #[test]
    fn seed_determinism_over_random_play() {
        for spec in registry() {
            let play = |seed: u64| {
                let mut env = create_env(&spec.game_id, false).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(99);
                let mut texts = vec![env.reset(Seed(seed)).text];
                for _ in 0..30 {
                    if env.is_terminal() {
                        break;
                    }
                    let moves: Vec<_> = env.oracle_legal_actions().unwrap().into_iter().collect();
                    let m = &moves[rng.random_range(0..moves.len())];
                    texts.push(env.step(m).unwrap().observation.text);
                }
                texts
            };
            assert_eq!(play(5), play(5), "{}", spec.game_id);
        }
    }
}
