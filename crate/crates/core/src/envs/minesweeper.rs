use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{hint_line, parse_pair, Game, Seed};

const SIZE: usize = 5;
const MINES: usize = 3;
const SAFE: usize = SIZE * SIZE - MINES;

/// 5x5 Minesweeper with 3 mines placed after the first (always safe)
/// reveal. The layout depends only on the seed and that first cell.
#[derive(Debug, Clone, Default)]
pub struct Minesweeper {
    seed: u64,
    mines: Vec<bool>,
    revealed: Vec<bool>,
    exploded: Option<usize>,
    started: bool,
    finished: bool,
}

fn neighbours(i: usize) -> impl Iterator<Item = usize> {
    let (r, c) = ((i / SIZE) as isize, (i % SIZE) as isize);
    (-1..=1).flat_map(move |dr| {
        (-1..=1).filter_map(move |dc| {
            let (nr, nc) = (r + dr, c + dc);
            let inside = (dr, dc) != (0, 0)
                && (0..SIZE as isize).contains(&nr)
                && (0..SIZE as isize).contains(&nc);
            inside.then(|| nr as usize * SIZE + nc as usize)
        })
    })
}

impl Minesweeper {
    /// Indices of mined cells, empty before the first reveal.
    pub fn mine_cells(&self) -> Vec<usize> {
        (0..self.mines.len()).filter(|&i| self.mines[i]).collect()
    }

    fn place_mines(&mut self, first: usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let others: Vec<usize> = (0..SIZE * SIZE).filter(|&i| i != first).collect();
        for k in index::sample(&mut rng, others.len(), MINES) {
            self.mines[others[k]] = true;
        }
    }

    fn adjacent_mines(&self, i: usize) -> usize {
        neighbours(i).filter(|&n| self.mines[n]).count()
    }

    fn revealed_safe(&self) -> usize {
        (0..SIZE * SIZE)
            .filter(|&i| self.revealed[i] && !self.mines[i])
            .count()
    }

    fn flood(&mut self, start: usize) {
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            if self.revealed[i] {
                continue;
            }
            self.revealed[i] = true;
            if self.adjacent_mines(i) == 0 {
                stack.extend(neighbours(i).filter(|&n| !self.revealed[n] && !self.mines[n]));
            }
        }
    }
}

impl Game for Minesweeper {
    fn players(&self) -> usize {
        1
    }

    fn reset(&mut self, seed: Seed) {
        *self = Minesweeper {
            seed: seed.0,
            mines: vec![false; SIZE * SIZE],
            revealed: vec![false; SIZE * SIZE],
            started: true,
            ..Minesweeper::default()
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
            "[GAME] You are playing Minesweeper on a {SIZE}x{SIZE} grid with {MINES} mines.\n\
             Reveal a cell with [row col] (e.g., [2 2]). Rows and columns are numbered from 0.\n\
             [GAME] Current board:\n   0 1 2 3 4\n"
        );
        for r in 0..SIZE {
            out.push_str(&format!(" {r}"));
            for c in 0..SIZE {
                let i = r * SIZE + c;
                let ch = if self.exploded == Some(i) {
                    '*'
                } else if self.revealed[i] {
                    char::from_digit(self.adjacent_mines(i) as u32, 10).unwrap_or('?')
                } else {
                    '.'
                };
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
        if r >= SIZE || c >= SIZE || self.revealed[r * SIZE + c] {
            return None;
        }
        let i = r * SIZE + c;
        if !self.revealed.iter().any(|&v| v) && self.mine_cells().is_empty() {
            self.place_mines(i);
        }
        if self.mines[i] {
            self.exploded = Some(i);
            self.finished = true;
        } else {
            self.flood(i);
            if self.revealed_safe() == SAFE {
                self.finished = true;
            }
        }
        let reward = if self.finished {
            self.revealed_safe() as f64 / SAFE as f64
        } else {
            0.0
        };
        Some(vec![reward])
    }

    fn legal_moves(&self) -> Vec<String> {
        (0..SIZE * SIZE)
            .filter(|&i| !self.revealed[i])
            .map(|i| format!("[{} {}]", i / SIZE, i % SIZE))
            .collect()
    }

    fn candidate_moves(&self) -> Vec<String> {
        let mut out: Vec<String> = (0..=SIZE)
            .flat_map(|r| (0..=SIZE).map(move |c| format!("[{r} {c}]")))
            .collect();
        out.extend(["[2]", "[1 1 1]", "[02 2]"].map(String::from));
        out
    }

    fn box_clone(&self) -> Box<dyn Game> {
        Box::new(self.clone())
    }
}
