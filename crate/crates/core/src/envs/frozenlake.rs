use super::{hint_line, Game, Seed};

const MAP: [&str; 4] = ["SFFF", "FHFH", "FFFH", "HFFG"];
const SIZE: usize = 4;
const MAX_MOVES: usize = 100;
const DIRECTIONS: [(&str, isize, isize); 4] = [
    ("up", -1, 0),
    ("down", 1, 0),
    ("left", 0, -1),
    ("right", 0, 1),
];

fn tile(r: usize, c: usize) -> u8 {
    MAP[r].as_bytes()[c]
}

/// Deterministic 4x4 FrozenLake. Moving off the grid is illegal.
#[derive(Debug, Clone, Default)]
pub struct FrozenLake {
    pos: (usize, usize),
    moves: usize,
    started: bool,
    finished: bool,
}

impl FrozenLake {
    fn target(&self, dr: isize, dc: isize) -> Option<(usize, usize)> {
        let r = self.pos.0.checked_add_signed(dr)?;
        let c = self.pos.1.checked_add_signed(dc)?;
        (r < SIZE && c < SIZE).then_some((r, c))
    }
}

impl Game for FrozenLake {
    fn players(&self) -> usize {
        1
    }

    fn reset(&mut self, _seed: Seed) {
        *self = FrozenLake {
            started: true,
            ..FrozenLake::default()
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
        let mut out = format!(
            "[GAME] You are playing Frozen Lake on a 4x4 grid. Reach the goal G from the start S without falling into a hole H.\n\
             Move with [up], [down], [left] or [right]. Moving off the grid is illegal.\n\
             [GAME] Moves used: {} / {MAX_MOVES}\n\
             [GAME] Current map (P marks your position):\n",
            self.moves
        );
        for r in 0..SIZE {
            let row: Vec<String> = (0..SIZE)
                .map(|c| {
                    if (r, c) == self.pos {
                        "P".to_string()
                    } else {
                        (tile(r, c) as char).to_string()
                    }
                })
                .collect();
            out.push_str(&row.join(" "));
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
        let name = token.strip_prefix('[')?.strip_suffix(']')?;
        let &(_, dr, dc) = DIRECTIONS.iter().find(|(n, _, _)| *n == name)?;
        self.pos = self.target(dr, dc)?;
        self.moves += 1;
        match tile(self.pos.0, self.pos.1) {
            b'G' => {
                self.finished = true;
                Some(vec![1.0])
            }
            b'H' => {
                self.finished = true;
                Some(vec![0.0])
            }
            _ => {
                if self.moves >= MAX_MOVES {
                    self.finished = true;
                }
                Some(vec![0.0])
            }
        }
    }

    fn legal_moves(&self) -> Vec<String> {
        DIRECTIONS
            .iter()
            .filter(|(_, dr, dc)| self.target(*dr, *dc).is_some())
            .map(|(n, _, _)| format!("[{n}]"))
            .collect()
    }

    fn candidate_moves(&self) -> Vec<String> {
        ["[up]", "[down]", "[left]", "[right]", "[Up]", "[north]", "[]", "[up down]"]
            .map(String::from)
            .to_vec()
    }

    fn box_clone(&self) -> Box<dyn Game> {
        Box::new(self.clone())
    }
}
