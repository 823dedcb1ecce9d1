use super::{hint_line, parse_pair, Game, Seed};

const START: [usize; 3] = [3, 4, 5];

/// Normal-play Nim: taking the last object wins.
#[derive(Debug, Clone, Default)]
pub struct Nim {
    heaps: [usize; 3],
    to_move: usize,
    started: bool,
    finished: bool,
}

impl Game for Nim {
    fn players(&self) -> usize {
        2
    }

    fn reset(&mut self, _seed: Seed) {
        *self = Nim {
            heaps: START,
            started: true,
            ..Nim::default()
        };
    }

    fn is_started(&self) -> bool {
        self.started
    }

    fn is_terminal(&self) -> bool {
        self.finished
    }

    fn current_player(&self) -> usize {
        self.to_move
    }

    fn render(&self) -> String {
        let mut out = format!(
            "[GAME] You are playing Nim as player {}.\n\
             Take objects from one heap with [heap amount] (e.g., [0 2]). Whoever takes the last object wins.\n\
             [GAME] Heaps:\n",
            self.to_move
        );
        for (i, h) in self.heaps.iter().enumerate() {
            out.push_str(&format!("heap {i}: {h}\n"));
        }
        if self.finished {
            out.push_str("[GAME] The game is over.\n");
        } else {
            out.push_str(&hint_line(&self.legal_moves()));
            out.push('\n');
        }
        out
    }

    fn apply(&mut self, token: &str) -> Option<Vec<f64>> {
        let (heap, amount) = parse_pair(token)?;
        if heap >= self.heaps.len() || amount == 0 || amount > self.heaps[heap] {
            return None;
        }
        self.heaps[heap] -= amount;
        let player = self.to_move;
        let mut rewards = vec![0.0; 2];
        if self.heaps.iter().all(|&h| h == 0) {
            self.finished = true;
            rewards[player] = 1.0;
            rewards[1 - player] = -1.0;
        } else {
            self.to_move = 1 - player;
        }
        Some(rewards)
    }

    fn legal_moves(&self) -> Vec<String> {
        self.heaps
            .iter()
            .enumerate()
            .flat_map(|(i, &h)| (1..=h).map(move |a| format!("[{i} {a}]")))
            .collect()
    }

    fn candidate_moves(&self) -> Vec<String> {
        let mut out: Vec<String> = (0..4)
            .flat_map(|h| (0..7).map(move |a| format!("[{h} {a}]")))
            .collect();
        out.extend(["[1]", "[0 1 1]", "[x 1]", "[0 01]"].map(String::from));
        out
    }

    fn box_clone(&self) -> Box<dyn Game> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use crate::envs::{create_env, Seed};

    #[test]
    fn overdraw_is_illegal() {
        let mut env = create_env("nim", false).unwrap();
        env.reset(Seed(0));
        assert_eq!(env.oracle_legal_actions().unwrap().len(), 12);
        let out = env.step("[2 6]").unwrap();
        assert!(!out.legal && out.done);
        assert_eq!(out.reward(0), -1.0);
    }

    #[test]
    fn last_take_wins() {
        let mut env = create_env("nim", false).unwrap();
        env.reset(Seed(0));
        env.step("[0 3]").unwrap();
        env.step("[1 4]").unwrap();
        let out = env.step("[2 5]").unwrap();
        assert!(out.done && out.legal);
        assert_eq!(out.rewards, vec![1.0, -1.0]);
    }
}
