use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{hint_line, parse_canonical, token_parts, Game, Seed};

const LOW: usize = 1;
const HIGH: usize = 20;
const TURNS: usize = 10;

/// Single-player number guessing with higher/lower feedback.
#[derive(Debug, Clone, Default)]
pub struct GuessTheNumber {
    secret: usize,
    history: Vec<(usize, &'static str)>,
    started: bool,
    finished: bool,
}

impl GuessTheNumber {
    pub fn secret(&self) -> usize {
        self.secret
    }
}

impl Game for GuessTheNumber {
    fn players(&self) -> usize {
        1
    }

    fn reset(&mut self, seed: Seed) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.0);
        *self = GuessTheNumber {
            secret: rng.random_range(LOW..=HIGH),
            started: true,
            ..GuessTheNumber::default()
        };
    }

    fn is_started(&self) -> bool {
        self.started
    }

    fn is_terminal(&self) -> bool {
        self.finished
    }

    fn current_player(&self) -> usize {
        0
    }

    fn render(&self) -> String {
        let feedback = if self.history.is_empty() {
            "none yet".to_string()
        } else {
            self.history
                .iter()
                .map(|(g, h)| format!("[{g}] {h}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut out = format!(
            "[GAME] You are playing Guess The Number. Find the secret number between {LOW} and {HIGH}.\n\
             Guess with a number in square brackets (e.g., [10]).\n\
             [GAME] Guesses remaining: {}\n\
             [GAME] Feedback so far: {feedback}\n",
            TURNS - self.history.len()
        );
        if self.finished {
            out.push_str("[GAME] The game is over.\n");
        } else {
            out.push_str(&hint_line(&self.legal_moves()));
            out.push('\n');
        }
        out
    }

    fn apply(&mut self, token: &str) -> Option<Vec<f64>> {
        let guess = match token_parts(token)?.as_slice() {
            [g] => parse_canonical(g)?,
            _ => return None,
        };
        if !(LOW..=HIGH).contains(&guess) {
            return None;
        }
        if guess == self.secret {
            self.history.push((guess, "correct"));
            self.finished = true;
            return Some(vec![1.0]);
        }
        let hint = if self.secret > guess { "higher" } else { "lower" };
        self.history.push((guess, hint));
        if self.history.len() >= TURNS {
            self.finished = true;
        }
        Some(vec![0.0])
    }

    fn legal_moves(&self) -> Vec<String> {
        (LOW..=HIGH).map(|n| format!("[{n}]")).collect()
    }

    fn candidate_moves(&self) -> Vec<String> {
        let mut out: Vec<String> = (0..=HIGH + 2).map(|n| format!("[{n}]")).collect();
        out.extend(["[01]", "[-1]", "[1 2]", "[ten]"].map(String::from));
        out
    }

    fn box_clone(&self) -> Box<dyn Game> {
        Box::new(self.clone())
    }
}
