use super::{hint_line, token_parts, Game, Seed};

const DISKS: u8 = 3;
const MAX_MOVES: usize = 100;
const PEGS: [&str; 3] = ["A", "B", "C"];

/// Three-peg, three-disk Tower of Hanoi.
#[derive(Debug, Clone, Default)]
pub struct TowerOfHanoi {
    pegs: [Vec<u8>; 3],
    moves: usize,
    started: bool,
    finished: bool,
}

fn peg_index(name: &str) -> Option<usize> {
    PEGS.iter().position(|p| *p == name)
}

impl TowerOfHanoi {
    fn can_move(&self, src: usize, dst: usize) -> bool {
        match (self.pegs[src].last(), self.pegs[dst].last()) {
            (None, _) => false,
            (Some(_), _) if src == dst => false,
            (Some(_), None) => true,
            (Some(top), Some(below)) => top < below,
        }
    }
}

impl Game for TowerOfHanoi {
    fn players(&self) -> usize {
        1
    }

    fn reset(&mut self, _seed: Seed) {
        *self = TowerOfHanoi {
            pegs: [(1..=DISKS).rev().collect(), Vec::new(), Vec::new()],
            started: true,
            ..TowerOfHanoi::default()
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
            "[GAME] You are playing Tower of Hanoi with {DISKS} disks. Move every disk from peg A to peg C.\n\
             Move the top disk with [source target] (e.g., [A C]). A disk may never sit on a smaller disk.\n\
             [GAME] Moves used: {} / {MAX_MOVES}\n",
            self.moves
        );
        for (name, peg) in PEGS.iter().zip(&self.pegs) {
            let disks = if peg.is_empty() {
                "-".to_string()
            } else {
                peg.iter().map(u8::to_string).collect::<Vec<_>>().join(" ")
            };
            out.push_str(&format!("{name}: {disks}\n"));
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
        let (src, dst) = match token_parts(token)?.as_slice() {
            [s, d] => (peg_index(s)?, peg_index(d)?),
            _ => return None,
        };
        if !self.can_move(src, dst) {
            return None;
        }
        let disk = self.pegs[src].pop()?;
        self.pegs[dst].push(disk);
        self.moves += 1;
        if self.pegs[2].len() == DISKS as usize {
            self.finished = true;
            return Some(vec![1.0]);
        }
        if self.moves >= MAX_MOVES {
            self.finished = true;
        }
        Some(vec![0.0])
    }

    fn legal_moves(&self) -> Vec<String> {
        let mut out = Vec::new();
        for src in 0..3 {
            for dst in 0..3 {
                if self.can_move(src, dst) {
                    out.push(format!("[{} {}]", PEGS[src], PEGS[dst]));
                }
            }
        }
        out
    }

    fn candidate_moves(&self) -> Vec<String> {
        let names = ["A", "B", "C", "D", "a"];
        let mut out: Vec<String> = names
            .iter()
            .flat_map(|s| names.iter().map(move |d| format!("[{s} {d}]")))
            .collect();
        out.extend(["[A]", "[0 2]", "[AC]"].map(String::from));
        out
    }

    fn box_clone(&self) -> Box<dyn Game> {
        Box::new(self.clone())
    }
}
