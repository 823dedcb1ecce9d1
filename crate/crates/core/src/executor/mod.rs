//! Guest code execution.
//!
//! Harness code is opaque text to the host. A [`GuestSession`] loads it and
//! answers `propose_action` / `is_legal_action` calls. Two backends exist:
//! [`ScriptedExecutor`] runs fixture harnesses in-process, and
//! [`ProcessExecutor`] talks to an external worker over the JSON-lines
//! protocol defined by [`Request`] and [`Response`].

mod process;
mod scripted;

use std::collections::BTreeSet;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use process::{ProcessExecutor, ProcessSession};
pub use scripted::{fnv1a64, splitmix64, ScriptedExecutor, ScriptedSession};

/// The two functions every harness must define.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuestFunction {
    ProposeAction,
    IsLegalAction,
}

impl GuestFunction {
    pub const ALL: [GuestFunction; 2] = [GuestFunction::ProposeAction, GuestFunction::IsLegalAction];

    pub fn name(self) -> &'static str {
        match self {
            GuestFunction::ProposeAction => "propose_action",
            GuestFunction::IsLegalAction => "is_legal_action",
        }
    }
}

impl fmt::Display for GuestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    CompileError,
    MissingFunction,
    GuestException,
    Timeout,
    ProtocolError,
    ResourceLimit,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::CompileError => "compile-error",
            ErrorKind::MissingFunction => "missing-function",
            ErrorKind::GuestException => "guest-exception",
            ErrorKind::Timeout => "timeout",
            ErrorKind::ProtocolError => "protocol-error",
            ErrorKind::ResourceLimit => "resource-limit",
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A failed guest call. Guest failures are data, not host errors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("{kind}: {message}")]
pub struct GuestFailure {
    pub kind: ErrorKind,
    pub message: String,
    #[serde(default)]
    pub traceback: String,
}

impl GuestFailure {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        GuestFailure {
            kind,
            message: message.into(),
            traceback: String::new(),
        }
    }

    pub fn with_traceback(mut self, traceback: impl Into<String>) -> Self {
        self.traceback = traceback.into();
        self
    }
}

pub type GuestResult<T> = Result<T, GuestFailure>;

/// Infrastructure failures, as opposed to misbehaving guest code.
#[derive(Debug, Error)]
pub enum ExecError {
    #[error("invalid executor limits: {0}")]
    InvalidLimits(String),
    #[error("failed to start worker: {0}")]
    Spawn(#[from] std::io::Error),
    #[error("worker handshake failed: {0}")]
    Handshake(String),
}

/// Serde adapter for durations as fractional seconds.
pub mod serde_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecLimits {
    #[serde(with = "serde_secs")]
    pub call_timeout: Duration,
    #[serde(with = "serde_secs")]
    pub load_timeout: Duration,
    pub memory_cap: u64,
    pub import_allowlist: BTreeSet<String>,
}

impl Default for ExecLimits {
    fn default() -> Self {
        let modules = [
            "math",
            "random",
            "re",
            "string",
            "itertools",
            "collections",
            "functools",
            "heapq",
            "copy",
            "typing",
            "numpy",
        ];
        ExecLimits {
            call_timeout: Duration::from_secs(5),
            load_timeout: Duration::from_secs(10),
            memory_cap: 512 * 1024 * 1024,
            import_allowlist: modules.iter().map(|m| m.to_string()).collect(),
        }
    }
}

impl ExecLimits {
    pub fn validate(&self) -> Result<(), ExecError> {
        if self.call_timeout.is_zero() || self.load_timeout.is_zero() {
            return Err(ExecError::InvalidLimits("timeouts must be positive".into()));
        }
        if self.memory_cap == 0 {
            return Err(ExecError::InvalidLimits("memory cap must be positive".into()));
        }
        if self.import_allowlist.is_empty() {
            return Err(ExecError::InvalidLimits("import allowlist is empty".into()));
        }
        Ok(())
    }
}

/// One loaded harness. A session serves one call at a time.
pub trait GuestSession: Send {
    fn ping(&mut self) -> GuestResult<()>;
    /// Replaces any previously loaded code. `rng_seed` seeds the guest RNG.
    fn load_code(&mut self, code: &str, rng_seed: Option<u64>) -> GuestResult<()>;
    /// `rng_seed` overrides the session seed for this call only.
    fn propose_action(&mut self, board: &str, rng_seed: Option<u64>) -> GuestResult<String>;
    fn is_legal_action(&mut self, board: &str, action: &str) -> GuestResult<bool>;
}

pub trait Executor: Send + Sync {
    fn start_session(&self) -> Result<Box<dyn GuestSession>, ExecError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Ping,
    Load,
    ProposeAction,
    IsLegalAction,
}

/// A request line on the worker's stdin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub op: Op,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub board: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_seed: Option<u64>,
}

impl Request {
    pub fn new(id: u64, op: Op) -> Self {
        Request {
            id,
            op,
            code: None,
            board: None,
            action: None,
            rng_seed: None,
        }
    }
}

/// A response line on the worker's stdout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<ErrorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traceback: Option<String>,
}

impl Response {
    pub fn success(id: u64, value: Option<serde_json::Value>) -> Self {
        Response {
            id,
            ok: true,
            value,
            error_kind: None,
            error_message: None,
            traceback: None,
        }
    }

    pub fn failure(id: u64, failure: &GuestFailure) -> Self {
        Response {
            id,
            ok: false,
            value: None,
            error_kind: Some(failure.kind),
            error_message: Some(failure.message.clone()),
            traceback: (!failure.traceback.is_empty()).then(|| failure.traceback.clone()),
        }
    }

    fn into_result(self) -> GuestResult<Option<serde_json::Value>> {
        match (self.ok, self.error_kind) {
            (true, None) => Ok(self.value),
            (false, Some(kind)) => Err(GuestFailure {
                kind,
                message: self.error_message.unwrap_or_default(),
                traceback: self.traceback.unwrap_or_default(),
            }),
            _ => Err(GuestFailure::new(
                ErrorKind::ProtocolError,
                "response `ok` flag disagrees with `error_kind`",
            )),
        }
    }

    pub fn into_unit(self) -> GuestResult<()> {
        self.into_result().map(|_| ())
    }

    pub fn into_text(self) -> GuestResult<String> {
        match self.into_result()? {
            Some(serde_json::Value::String(s)) => Ok(s),
            other => Err(GuestFailure::new(
                ErrorKind::ProtocolError,
                format!("propose_action must return str, got {}", describe_value(&other)),
            )),
        }
    }

    pub fn into_bool(self) -> GuestResult<bool> {
        match self.into_result()? {
            Some(serde_json::Value::Bool(b)) => Ok(b),
            other => Err(GuestFailure::new(
                ErrorKind::ProtocolError,
                format!("is_legal_action must return bool, got {}", describe_value(&other)),
            )),
        }
    }
}

fn describe_value(value: &Option<serde_json::Value>) -> String {
    match value {
        None => "nothing".into(),
        Some(v) => v.to_string(),
    }
}
