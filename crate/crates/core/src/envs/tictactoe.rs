use super::{hint_line, parse_pair, Game, Seed};

const LINES: [[usize; 3]; 8] = [
    [0, 1, 2],
    [3, 4, 5],
    [6, 7, 8],
    [0, 3, 6],
    [1, 4, 7],
    [2, 5, 8],
    [0, 4, 8],
    [2, 4, 6],
];

/// Two-player noughts and crosses; player 0 is X.
#[derive(Debug, Clone, Default)]
pub struct TicTacToe {
    cells: [Option<usize>; 9],
    to_move: usize,
    started: bool,
    finished: bool,
}

impl TicTacToe {
    fn mark(player: usize) -> char {
        if player == 0 {
            'X'
        } else {
            'O'
        }
    }

    fn has_line(&self, player: usize) -> bool {
        LINES
            .iter()
            .any(|line| line.iter().all(|&i| self.cells[i] == Some(player)))
    }
}

impl Game for TicTacToe {
    fn players(&self) -> usize {
        2
    }

    fn reset(&mut self, _seed: Seed) {
        *self = TicTacToe {
            started: true,
            ..TicTacToe::default()
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
            "[GAME] You are playing Tic Tac Toe as player {} ({}).\n\
             Place your mark with [row col] (e.g., [1 1]). Rows and columns are numbered from 0.\n\
             [GAME] Current board:\n   0 1 2\n",
            self.to_move,
            Self::mark(self.to_move)
        );
        for r in 0..3 {
            out.push_str(&format!(" {r}"));
            for c in 0..3 {
                let ch = self.cells[r * 3 + c].map_or('.', Self::mark);
                out.push(' ');
                out.push(ch);
            }
            out.push('\n');
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
        let (r, c) = parse_pair(token)?;
        if r > 2 || c > 2 || self.cells[r * 3 + c].is_some() {
            return None;
        }
        let player = self.to_move;
        self.cells[r * 3 + c] = Some(player);
        let mut rewards = vec![0.0; 2];
        if self.has_line(player) {
            self.finished = true;
            rewards[player] = 1.0;
            rewards[1 - player] = -1.0;
        } else if self.cells.iter().all(Option::is_some) {
            self.finished = true;
        } else {
            self.to_move = 1 - player;
        }
        Some(rewards)
    }

    fn legal_moves(&self) -> Vec<String> {
        (0..9)
            .filter(|&i| self.cells[i].is_none())
            .map(|i| format!("[{} {}]", i / 3, i % 3))
            .collect()
    }

    fn candidate_moves(&self) -> Vec<String> {
        let mut out: Vec<String> = (0..4)
            .flat_map(|r| (0..4).map(move |c| format!("[{r} {c}]")))
            .collect();
        out.extend(["[0]", "[1 1 1]", "[a b]", "[01 1]", "[]"].map(String::from));
        out
    }

    fn box_clone(&self) -> Box<dyn Game> {
        Box::new(self.clone())
    }
}
