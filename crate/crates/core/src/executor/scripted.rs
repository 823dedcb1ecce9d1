//! In-process executor for fixture harnesses.
//!
//! The code text is never executed. Loading performs the same static checks
//! a worker would (shallow syntax, required functions, import allowlist),
//! then each required function is driven by the `# scripted:` directive in
//! its body:
//!
//! | directive            | `propose_action`               | `is_legal_action`            |
//! |----------------------|--------------------------------|------------------------------|
//! | `oracle <game>`      | hashed pick among legal moves  | membership in legal moves    |
//! | `noisy <game> <pct>` | `[9 9]` with probability pct   | n/a                          |
//! | `constant <text>`    | returns `<text>`               | `True`/`False`, else protocol-error |
//! | `raise <message>`    | guest exception                | guest exception              |
//! | `loop`               | timeout                        | timeout                      |
//!
//! A function without a directive behaves like the signature stub and
//! raises `NotImplementedError`.

use super::{
    ErrorKind, ExecError, ExecLimits, Executor, GuestFailure, GuestFunction, GuestResult,
    GuestSession,
};
use crate::board;
use crate::envs::first_bracket_token;

/// FNV-1a over the UTF-8 bytes of `text`.
pub fn fnv1a64(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

pub fn splitmix64(x: u64) -> u64 {
    let x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let z = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    let z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Behavior {
    Oracle(String),
    Noisy(String, u64),
    Constant(String),
    Raise(String),
    Loop,
    Unimplemented,
}

impl Behavior {
    fn parse(directive: &str) -> Result<Behavior, String> {
        let (verb, rest) = directive
            .trim()
            .split_once(' ')
            .map_or((directive.trim(), ""), |(v, r)| (v, r.trim()));
        match verb {
            "oracle" if !rest.is_empty() => Ok(Behavior::Oracle(rest.to_string())),
            "noisy" => {
                let (game, pct) = rest
                    .split_once(' ')
                    .ok_or_else(|| format!("bad noisy directive `{rest}`"))?;
                let pct = pct.parse().map_err(|_| format!("bad percentage `{pct}`"))?;
                Ok(Behavior::Noisy(game.to_string(), pct))
            }
            "constant" => Ok(Behavior::Constant(rest.to_string())),
            "raise" => Ok(Behavior::Raise(rest.to_string())),
            "loop" => Ok(Behavior::Loop),
            _ => Err(format!("unknown scripted directive `{directive}`")),
        }
    }
}

#[derive(Debug, Clone)]
struct LoadedHarness {
    propose: Behavior,
    is_legal: Behavior,
}

/// Top-level `def` blocks as `(name, body)` pairs.
fn def_blocks(code: &str) -> Vec<(String, String)> {
    let mut blocks: Vec<(String, String)> = Vec::new();
    let mut current: Option<(String, String)> = None;
    for line in code.lines() {
        let top_level = !line.is_empty() && !line.starts_with([' ', '\t']);
        if top_level {
            if let Some(done) = current.take() {
                blocks.push(done);
            }
            if let Some(rest) = line.strip_prefix("def ") {
                let name = rest.split('(').next().unwrap_or("").trim().to_string();
                current = Some((name, String::new()));
                continue;
            }
        }
        if let Some((_, body)) = current.as_mut() {
            body.push_str(line);
            body.push('\n');
        }
    }
    blocks.extend(current);
    blocks
}

/// Bracket balance outside string literals and comments.
fn shallow_syntax_check(code: &str) -> Result<(), String> {
    let mut stack = Vec::new();
    for (lineno, line) in code.lines().enumerate() {
        let mut quote: Option<char> = None;
        for ch in line.chars() {
            match quote {
                Some(q) if ch == q => quote = None,
                Some(_) => {}
                None => match ch {
                    '#' => break,
                    '"' | '\'' => quote = Some(ch),
                    '(' | '[' | '{' => stack.push((ch, lineno + 1)),
                    ')' | ']' | '}' => {
                        let want = match ch {
                            ')' => '(',
                            ']' => '[',
                            _ => '{',
                        };
                        match stack.pop() {
                            Some((open, _)) if open == want => {}
                            _ => return Err(format!("line {}: unmatched '{ch}'", lineno + 1)),
                        }
                    }
                    _ => {}
                },
            }
        }
    }
    match stack.pop() {
        Some((open, line)) => Err(format!("line {line}: '{open}' was never closed")),
        None => Ok(()),
    }
}

fn imported_modules(code: &str) -> Vec<String> {
    let mut out = Vec::new();
    for line in code.lines().map(str::trim_start) {
        if let Some(rest) = line.strip_prefix("import ") {
            for part in rest.split(',') {
                let module = part.split_whitespace().next().unwrap_or("");
                out.push(module.split('.').next().unwrap_or("").to_string());
            }
        } else if let Some(rest) = line.strip_prefix("from ") {
            let module = rest.split_whitespace().next().unwrap_or("");
            out.push(module.split('.').next().unwrap_or("").to_string());
        }
    }
    out
}

fn directive_of(body: &str) -> Option<&str> {
    body.lines()
        .filter_map(|l| l.trim().strip_prefix('#'))
        .find_map(|c| c.trim_start().strip_prefix("scripted:"))
}

fn parse_harness(code: &str, limits: &ExecLimits) -> GuestResult<LoadedHarness> {
    shallow_syntax_check(code)
        .map_err(|m| GuestFailure::new(ErrorKind::CompileError, format!("SyntaxError: {m}")))?;
    for module in imported_modules(code) {
        if !limits.import_allowlist.contains(&module) {
            return Err(GuestFailure::new(
                ErrorKind::ResourceLimit,
                format!("import of `{module}` is not allowed"),
            ));
        }
    }
    let blocks = def_blocks(code);
    let mut behaviors = Vec::new();
    for function in GuestFunction::ALL {
        let Some((_, body)) = blocks.iter().rev().find(|(n, _)| n == function.name()) else {
            return Err(GuestFailure::new(
                ErrorKind::MissingFunction,
                format!("required function `{function}` is not defined"),
            ));
        };
        let behavior = match directive_of(body) {
            Some(d) => Behavior::parse(d)
                .map_err(|m| GuestFailure::new(ErrorKind::CompileError, m))?,
            None => Behavior::Unimplemented,
        };
        behaviors.push(behavior);
    }
    let is_legal = behaviors.pop().expect("two functions");
    let propose = behaviors.pop().expect("two functions");
    Ok(LoadedHarness { propose, is_legal })
}

fn traceback(function: GuestFunction, exc: &str) -> String {
    format!(
        "Traceback (most recent call last):\n  File \"<harness>\", in {function}\n{exc}\n"
    )
}

fn raised(function: GuestFunction, exc_type: &str, message: &str) -> GuestFailure {
    let exc = if message.is_empty() {
        exc_type.to_string()
    } else {
        format!("{exc_type}: {message}")
    };
    GuestFailure::new(ErrorKind::GuestException, message).with_traceback(traceback(function, &exc))
}

/// In-process [`Executor`] for fixture harnesses.
#[derive(Debug, Clone, Default)]
pub struct ScriptedExecutor {
    limits: ExecLimits,
}

impl ScriptedExecutor {
    pub fn new(limits: ExecLimits) -> Self {
        ScriptedExecutor { limits }
    }
}

impl Executor for ScriptedExecutor {
    fn start_session(&self) -> Result<Box<dyn GuestSession>, ExecError> {
        self.limits.validate()?;
        Ok(Box::new(ScriptedSession::new(self.limits.clone())))
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedSession {
    limits: ExecLimits,
    harness: Option<LoadedHarness>,
    seed: u64,
    calls: u64,
}

impl ScriptedSession {
    pub fn new(limits: ExecLimits) -> Self {
        ScriptedSession {
            limits,
            harness: None,
            seed: 0,
            calls: 0,
        }
    }

    /// Number of function calls served since the session started.
    pub fn calls(&self) -> u64 {
        self.calls
    }

    fn loaded(&self) -> GuestResult<&LoadedHarness> {
        self.harness
            .as_ref()
            .ok_or_else(|| GuestFailure::new(ErrorKind::ProtocolError, "no code loaded"))
    }

    fn timeout(&self) -> GuestFailure {
        GuestFailure::new(
            ErrorKind::Timeout,
            format!(
                "call exceeded {:.1}s and the worker was restarted",
                self.limits.call_timeout.as_secs_f64()
            ),
        )
    }

    fn legal(function: GuestFunction, game: &str, board: &str) -> GuestResult<Vec<String>> {
        board::legal_actions(game, board).map_err(|e| raised(function, "Exception", &e.to_string()))
    }
}

impl GuestSession for ScriptedSession {
    fn ping(&mut self) -> GuestResult<()> {
        Ok(())
    }

    fn load_code(&mut self, code: &str, rng_seed: Option<u64>) -> GuestResult<()> {
        self.harness = None;
        self.seed = rng_seed.unwrap_or(0);
        self.harness = Some(parse_harness(code, &self.limits)?);
        Ok(())
    }

    fn propose_action(&mut self, board: &str, rng_seed: Option<u64>) -> GuestResult<String> {
        const F: GuestFunction = GuestFunction::ProposeAction;
        self.calls += 1;
        let draw = splitmix64(fnv1a64(board) ^ rng_seed.unwrap_or(self.seed));
        match &self.loaded()?.propose {
            Behavior::Oracle(game) => {
                let moves = Self::legal(F, game, board)?;
                if moves.is_empty() {
                    return Err(raised(F, "Exception", "no legal action found on the board"));
                }
                Ok(moves[(draw % moves.len() as u64) as usize].clone())
            }
            Behavior::Noisy(game, pct) => {
                if splitmix64(draw) % 100 < *pct {
                    return Ok("[9 9]".to_string());
                }
                let moves = Self::legal(F, game, board)?;
                if moves.is_empty() {
                    return Err(raised(F, "ZeroDivisionError", "integer modulo by zero"));
                }
                Ok(moves[(draw % moves.len() as u64) as usize].clone())
            }
            Behavior::Constant(text) => Ok(text.clone()),
            Behavior::Raise(message) => Err(raised(F, "Exception", message)),
            Behavior::Loop => Err(self.timeout()),
            Behavior::Unimplemented => Err(raised(F, "NotImplementedError", "")),
        }
    }

    fn is_legal_action(&mut self, board: &str, action: &str) -> GuestResult<bool> {
        const F: GuestFunction = GuestFunction::IsLegalAction;
        self.calls += 1;
        match &self.loaded()?.is_legal {
            Behavior::Oracle(game) => {
                let moves = Self::legal(F, game, board)?;
                Ok(first_bracket_token(action).is_some_and(|t| moves.iter().any(|m| m == t)))
            }
            Behavior::Constant(text) => match text.as_str() {
                "True" | "true" => Ok(true),
                "False" | "false" => Ok(false),
                other => Err(GuestFailure::new(
                    ErrorKind::ProtocolError,
                    format!("is_legal_action must return bool, got {other:?}"),
                )),
            },
            Behavior::Raise(message) => Err(raised(F, "Exception", message)),
            Behavior::Loop => Err(self.timeout()),
            Behavior::Unimplemented => Err(raised(F, "NotImplementedError", "")),
            Behavior::Noisy(..) => Err(GuestFailure::new(
                ErrorKind::CompileError,
                "`noisy` applies only to propose_action",
            )),
        }
    }
}
