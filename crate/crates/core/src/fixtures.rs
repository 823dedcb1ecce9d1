//! Harness code texts used as fixtures and as the root of every search.
//!
//! Fixture harnesses are valid Python. Each required function also carries
//! a `# scripted: ...` directive that [`crate::executor::ScriptedExecutor`]
//! interprets, so the same text runs in-process and in an external worker.
//! The Python bodies read the board exactly like [`crate::board`] and pick
//! moves with the same FNV-1a/SplitMix64 draw as the in-process executor.
//! The worker is expected to expose the session seed as the guest global
//! `RNG_SEED`.

use crate::tree::Mode;

/// The canonical verifier-mode signatures; bodies raise.
pub const VERIFIER_SIGNATURES: &str = include_str!("../prompts/signatures_verifier.py");
/// Policy-mode signatures; only the `propose_action` docstring differs.
pub const POLICY_SIGNATURES: &str = include_str!("../prompts/signatures_policy.py");

pub fn signatures(mode: Mode) -> &'static str {
    match mode {
        Mode::Verifier => VERIFIER_SIGNATURES,
        Mode::Policy => POLICY_SIGNATURES,
    }
}

/// Root code for a new search: the signatures with raising bodies.
pub fn stub_code(mode: Mode) -> String {
    signatures(mode).to_string()
}

const PY_COMMON: &str = r#"RNG_SEED = 0
_MASK = (1 << 64) - 1


def _fnv1a64(text: str) -> int:
  h = 0xCBF29CE484222325
  for b in text.encode("utf-8"):
    h = ((h ^ b) * 0x100000001B3) & _MASK
  return h


def _splitmix64(x: int) -> int:
  x = (x + 0x9E3779B97F4A7C15) & _MASK
  z = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
  z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
  return z ^ (z >> 31)


def _first_token(action: str):
  start = action.find("[")
  if start < 0:
    return None
  end = action.find("]", start)
  if end < 0:
    return None
  return action[start:end + 1]


def _grid(board: str, size: int) -> list:
  lines = board.split("\n")
  start = next(i for i, l in enumerate(lines) if l.startswith("[GAME] Current board:")) + 2
  return [l.split()[1:] for l in lines[start:start + size]]


def _open_cells(grid: list) -> list:
  return ["[%d %d]" % (r, c) for r, row in enumerate(grid) for c, ch in enumerate(row) if ch == "."]
"#;

fn py_legal_actions(game_id: &str) -> &'static str {
    match game_id {
        "guessthenumber" => {
            r#"def _legal_actions(board: str) -> list:
  words = board.split("between ", 1)[1].split()
  low, high = int(words[0]), int(words[2].rstrip("."))
  return ["[%d]" % n for n in range(low, high + 1)]
"#
        }
        "towerofhanoi" => {
            r#"def _legal_actions(board: str) -> list:
  pegs = {}
  for line in board.split("\n"):
    for name in "ABC":
      if line.startswith(name + ": ") and name not in pegs:
        pegs[name] = [int(d) for d in line[3:].split() if d != "-"]
  moves = []
  for s in "ABC":
    for d in "ABC":
      if s != d and pegs[s] and (not pegs[d] or pegs[s][-1] < pegs[d][-1]):
        moves.append("[%s %s]" % (s, d))
  return moves
"#
        }
        "frozenlake" => {
            r#"def _legal_actions(board: str) -> list:
  lines = board.split("\n")
  start = next(i for i, l in enumerate(lines) if l.startswith("[GAME] Current map")) + 1
  rows = [l.split() for l in lines[start:start + 4]]
  found = [(r, row.index("P")) for r, row in enumerate(rows) if "P" in row]
  if not found:
    raise Exception("player marker not found")
  r, c = found[0]
  moves = []
  if r > 0:
    moves.append("[up]")
  if r + 1 < len(rows):
    moves.append("[down]")
  if c > 0:
    moves.append("[left]")
  if c + 1 < len(rows[r]):
    moves.append("[right]")
  return moves
"#
        }
        "minesweeper-small" => {
            r#"def _legal_actions(board: str) -> list:
  return _open_cells(_grid(board, 5))
"#
        }
        "tictactoe" => {
            r#"def _legal_actions(board: str) -> list:
  return _open_cells(_grid(board, 3))
"#
        }
        "nim" => {
            r#"def _legal_actions(board: str) -> list:
  moves = []
  for line in board.split("\n"):
    if line.startswith("heap "):
      heap, size = line[5:].split(": ")
      moves += ["[%s %d]" % (heap, a) for a in range(1, int(size) + 1)]
  return moves
"#
        }
        _ => {
            r#"def _legal_actions(board: str) -> list:
  raise Exception("unknown game")
"#
        }
    }
}

/// A harness whose functions agree exactly with the game's legality oracle.
/// `propose_action` draws uniformly-hashed legal moves.
pub fn oracle_harness(game_id: &str) -> String {
    format!(
        r#"{PY_COMMON}

{legal}

def propose_action(board: str) -> str:
  """Propose a valid random action given the game board as text"""
  # scripted: oracle {game_id}
  moves = _legal_actions(board)
  if not moves:
    raise Exception("no legal action found on the board")
  return moves[_splitmix64(_fnv1a64(board) ^ RNG_SEED) % len(moves)]


def is_legal_action(board: str, action: str) -> bool:
  """Check if an action string is valid given the game board as text"""
  # scripted: oracle {game_id}
  token = _first_token(action)
  return token is not None and token in _legal_actions(board)
"#,
        legal = py_legal_actions(game_id),
    )
}

/// A harness that always proposes `action` and answers `verdict` for every
/// legality query.
pub fn constant_harness(action: &str, verdict: bool) -> String {
    let py_bool = if verdict { "True" } else { "False" };
    format!(
        r#"def propose_action(board: str) -> str:
  # scripted: constant {action}
  return {action:?}


def is_legal_action(board: str, action: str) -> bool:
  # scripted: constant {py_bool}
  return {py_bool}
"#
    )
}

/// A harness whose functions both raise `message`.
pub fn raising_harness(message: &str) -> String {
    format!(
        r#"def propose_action(board: str) -> str:
  # scripted: raise {message}
  raise Exception({message:?})


def is_legal_action(board: str, action: str) -> bool:
  # scripted: raise {message}
  raise Exception({message:?})
"#
    )
}

/// Oracle legality checking with a proposer that returns the malformed
/// move `[9 9]` with probability `percent`/100 per call.
pub fn noisy_harness(game_id: &str, percent: u8) -> String {
    format!(
        r#"{PY_COMMON}

{legal}

def propose_action(board: str) -> str:
  # scripted: noisy {game_id} {percent}
  draw = _splitmix64(_fnv1a64(board) ^ RNG_SEED)
  if _splitmix64(draw) % 100 < {percent}:
    return "[9 9]"
  moves = _legal_actions(board)
  return moves[draw % len(moves)]


def is_legal_action(board: str, action: str) -> bool:
  # scripted: oracle {game_id}
  token = _first_token(action)
  return token is not None and token in _legal_actions(board)
"#,
        legal = py_legal_actions(game_id),
    )
}

/// Wraps code the way a model reply would: prose, then one fenced block.
pub fn as_llm_reply(code: &str) -> String {
    format!("Thoughts: the previous code failed on the boards above, so here is a refinement.\n```python\n{code}\n```\n")
}

/// Scripted refiner replies for a search whose `oracle_at`-th refinement
/// (1-based) is the oracle harness. Earlier replies are flawed harnesses.
pub fn scripted_refinements(game_id: &str, oracle_at: usize) -> Vec<String> {
    (1..=oracle_at)
        .map(|i| {
            let code = if i == oracle_at {
                oracle_harness(game_id)
            } else if i % 2 == 1 {
                constant_harness("[9 9]", true)
            } else {
                noisy_harness(game_id, 20)
            };
            as_llm_reply(&code)
        })
        .collect()
}
