//! Reads legal moves back out of hint-free observation text.
//!
//! These parsers see only what an agent sees. They back the oracle fixture
//! harnesses and the random-legal baseline agent.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot read {game} board: {reason}")]
pub struct BoardError {
    pub game: String,
    pub reason: String,
}

fn fail<T>(game: &str, reason: impl Into<String>) -> Result<T, BoardError> {
    Err(BoardError {
        game: game.to_string(),
        reason: reason.into(),
    })
}

/// Lines following the first line that starts with `header`.
fn after<'a>(board: &'a str, header: &str) -> Option<impl Iterator<Item = &'a str>> {
    let mut lines = board.lines();
    lines.by_ref().find(|l| l.starts_with(header))?;
    Some(lines)
}

/// Reads `rows` lines of the form ` r c0 c1 ...` below a column header.
fn grid(board: &str, game: &str, rows: usize) -> Result<Vec<Vec<char>>, BoardError> {
    let Some(mut lines) = after(board, "[GAME] Current board:") else {
        return fail(game, "missing board header");
    };
    lines.next();
    let mut out = Vec::with_capacity(rows);
    for r in 0..rows {
        let Some(line) = lines.next() else {
            return fail(game, format!("missing row {r}"));
        };
        let mut cells = line.split_whitespace();
        if cells.next() != Some(r.to_string().as_str()) {
            return fail(game, format!("row {r} is mislabelled"));
        }
        let row: Vec<char> = cells.filter_map(|c| c.chars().next()).collect();
        out.push(row);
    }
    Ok(out)
}

fn cells_matching(grid: &[Vec<char>], pred: impl Fn(char) -> bool) -> Vec<String> {
    let mut out = Vec::new();
    for (r, row) in grid.iter().enumerate() {
        for (c, &ch) in row.iter().enumerate() {
            if pred(ch) {
                out.push(format!("[{r} {c}]"));
            }
        }
    }
    out
}

fn guess(board: &str) -> Result<Vec<String>, BoardError> {
    let Some(rest) = board.split("between ").nth(1) else {
        return fail("guessthenumber", "missing range");
    };
    let mut words = rest.split_whitespace();
    let low = words.next().and_then(|w| w.parse::<u32>().ok());
    let high = words
        .nth(1)
        .and_then(|w| w.trim_end_matches('.').parse::<u32>().ok());
    match (low, high) {
        (Some(lo), Some(hi)) if lo <= hi => Ok((lo..=hi).map(|n| format!("[{n}]")).collect()),
        _ => fail("guessthenumber", "unreadable range"),
    }
}

fn hanoi(board: &str) -> Result<Vec<String>, BoardError> {
    let mut pegs: Vec<Vec<u32>> = Vec::new();
    for name in ["A", "B", "C"] {
        let prefix = format!("{name}: ");
        let Some(line) = board.lines().find(|l| l.starts_with(&prefix)) else {
            return fail("towerofhanoi", format!("missing peg {name}"));
        };
        let disks = line[prefix.len()..]
            .split_whitespace()
            .filter(|d| *d != "-")
            .map(str::parse)
            .collect::<Result<Vec<u32>, _>>();
        match disks {
            Ok(d) => pegs.push(d),
            Err(_) => return fail("towerofhanoi", format!("bad disk on peg {name}")),
        }
    }
    let names = ["A", "B", "C"];
    let mut out = Vec::new();
    for s in 0..3 {
        for d in 0..3 {
            let ok = match (pegs[s].last(), pegs[d].last()) {
                (Some(_), _) if s == d => false,
                (Some(_), None) => true,
                (Some(top), Some(below)) => top < below,
                (None, _) => false,
            };
            if ok {
                out.push(format!("[{} {}]", names[s], names[d]));
            }
        }
    }
    Ok(out)
}

fn frozenlake(board: &str) -> Result<Vec<String>, BoardError> {
    let Some(lines) = after(board, "[GAME] Current map") else {
        return fail("frozenlake", "missing map header");
    };
    let rows: Vec<Vec<&str>> = lines
        .take(4)
        .map(|l| l.split_whitespace().collect())
        .collect();
    let pos = rows.iter().enumerate().find_map(|(r, row)| {
        row.iter().position(|&t| t == "P").map(|c| (r, c))
    });
    let Some((r, c)) = pos else {
        return fail("frozenlake", "player marker not found");
    };
    let height = rows.len();
    let width = rows[r].len();
    let mut out = Vec::new();
    if r > 0 {
        out.push("[up]".to_string());
    }
    if r + 1 < height {
        out.push("[down]".to_string());
    }
    if c > 0 {
        out.push("[left]".to_string());
    }
    if c + 1 < width {
        out.push("[right]".to_string());
    }
    Ok(out)
}

fn nim(board: &str) -> Result<Vec<String>, BoardError> {
    let mut out = Vec::new();
    let mut seen = 0;
    for line in board.lines().filter(|l| l.starts_with("heap ")) {
        let parsed = line["heap ".len()..]
            .split_once(": ")
            .and_then(|(i, n)| Some((i.parse::<usize>().ok()?, n.parse::<usize>().ok()?)));
        let Some((heap, size)) = parsed else {
            return fail("nim", format!("bad heap line `{line}`"));
        };
        out.extend((1..=size).map(|a| format!("[{heap} {a}]")));
        seen += 1;
    }
    if seen == 0 {
        return fail("nim", "no heaps");
    }
    Ok(out)
}

/// Legal moves for `game_id` in the position shown on `board`, in the same
/// order the environment lists them.
pub fn legal_actions(game_id: &str, board: &str) -> Result<Vec<String>, BoardError> {
    match game_id {
        "guessthenumber" => guess(board),
        "towerofhanoi" => hanoi(board),
        "frozenlake" => frozenlake(board),
        "minesweeper-small" => Ok(cells_matching(&grid(board, game_id, 5)?, |c| c == '.')),
        "tictactoe" => Ok(cells_matching(&grid(board, game_id, 3)?, |c| c == '.')),
        "nim" => nim(board),
        other => fail(other, "no board reader for this game"),
    }
}
