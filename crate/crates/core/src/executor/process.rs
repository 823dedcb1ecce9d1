//! Host side of the JSON-lines worker protocol.
//!
//! Limits reach the worker through environment variables
//! (`HARNESS_MEMORY_CAP`, `HARNESS_IMPORT_ALLOWLIST`, `HARNESS_CALL_TIMEOUT`);
//! timeouts are enforced here by killing and restarting the worker.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use tracing::{debug, warn};

use super::{
    ErrorKind, ExecError, ExecLimits, Executor, GuestFailure, GuestResult, GuestSession, Op,
    Request, Response,
};

/// Launches one worker process per session.
#[derive(Debug, Clone)]
pub struct ProcessExecutor {
    command: Vec<String>,
    limits: ExecLimits,
}

impl ProcessExecutor {
    pub fn new(command: Vec<String>, limits: ExecLimits) -> Self {
        ProcessExecutor { command, limits }
    }
}

impl Executor for ProcessExecutor {
    fn start_session(&self) -> Result<Box<dyn GuestSession>, ExecError> {
        self.limits.validate()?;
        if self.command.is_empty() {
            return Err(ExecError::InvalidLimits("worker command is empty".into()));
        }
        Ok(Box::new(ProcessSession::start(
            self.command.clone(),
            self.limits.clone(),
        )?))
    }
}

struct Worker {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Worker {
    fn spawn(command: &[String], limits: &ExecLimits) -> Result<Worker, ExecError> {
        let allowlist: Vec<&str> = limits.import_allowlist.iter().map(String::as_str).collect();
        let mut child = Command::new(&command[0])
            .args(&command[1..])
            .env("HARNESS_MEMORY_CAP", limits.memory_cap.to_string())
            .env("HARNESS_IMPORT_ALLOWLIST", allowlist.join(","))
            .env(
                "HARNESS_CALL_TIMEOUT",
                limits.call_timeout.as_secs_f64().to_string(),
            )
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Worker {
            child,
            stdin,
            lines,
        })
    }

    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        self.kill();
    }
}

enum CallError {
    Timeout,
    Exited,
    Protocol(String),
}

pub struct ProcessSession {
    command: Vec<String>,
    limits: ExecLimits,
    worker: Worker,
    next_id: u64,
    loaded: Option<(String, Option<u64>)>,
    restarts: u64,
}

impl ProcessSession {
    fn start(command: Vec<String>, limits: ExecLimits) -> Result<Self, ExecError> {
        let worker = Worker::spawn(&command, &limits)?;
        let mut session = ProcessSession {
            command,
            limits,
            worker,
            next_id: 0,
            loaded: None,
            restarts: 0,
        };
        session.handshake()?;
        Ok(session)
    }

    /// Worker restarts caused by timeouts or crashes.
    pub fn restarts(&self) -> u64 {
        self.restarts
    }

    fn handshake(&mut self) -> Result<(), ExecError> {
        let req = Request::new(self.take_id(), Op::Ping);
        match self.exchange(&req, self.limits.load_timeout) {
            Ok(resp) if resp.ok => Ok(()),
            Ok(resp) => Err(ExecError::Handshake(
                resp.error_message.unwrap_or_else(|| "ping refused".into()),
            )),
            Err(CallError::Timeout) => Err(ExecError::Handshake("no reply to ping".into())),
            Err(CallError::Exited) => Err(ExecError::Handshake("worker exited".into())),
            Err(CallError::Protocol(m)) => Err(ExecError::Handshake(m)),
        }
    }

    fn take_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn exchange(&mut self, req: &Request, timeout: Duration) -> Result<Response, CallError> {
        let mut line = serde_json::to_string(req).expect("requests serialize");
        line.push('\n');
        if self.worker.stdin.write_all(line.as_bytes()).is_err() || self.worker.stdin.flush().is_err()
        {
            return Err(CallError::Exited);
        }
        let deadline = Instant::now() + timeout;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            match self.worker.lines.recv_timeout(remaining) {
                Ok(text) => {
                    let resp: Response = serde_json::from_str(&text)
                        .map_err(|e| CallError::Protocol(format!("unparseable response: {e}")))?;
                    if resp.id == req.id {
                        return Ok(resp);
                    }
                    if resp.id > req.id {
                        return Err(CallError::Protocol(format!(
                            "response id {} does not match request id {}",
                            resp.id, req.id
                        )));
                    }
                    debug!(id = resp.id, "discarding stale response");
                }
                Err(RecvTimeoutError::Timeout) => return Err(CallError::Timeout),
                Err(RecvTimeoutError::Disconnected) => return Err(CallError::Exited),
            }
        }
    }

    /// Kills the worker, starts a fresh one and reloads the current code.
    fn restart(&mut self) {
        self.restarts += 1;
        self.worker.kill();
        match Worker::spawn(&self.command, &self.limits) {
            Ok(worker) => self.worker = worker,
            Err(e) => {
                warn!(error = %e, "worker restart failed");
                return;
            }
        }
        if self.handshake().is_err() {
            warn!("restarted worker did not answer ping");
            return;
        }
        if let Some((code, seed)) = self.loaded.clone() {
            let mut req = Request::new(self.take_id(), Op::Load);
            req.code = Some(code);
            req.rng_seed = seed;
            let timeout = self.limits.load_timeout;
            if !matches!(self.exchange(&req, timeout), Ok(r) if r.ok) {
                warn!("reloading code after restart failed");
            }
        }
    }

    fn call(&mut self, mut req: Request, timeout: Duration) -> GuestResult<Response> {
        req.id = self.take_id();
        match self.exchange(&req, timeout) {
            Ok(resp) => Ok(resp),
            Err(CallError::Timeout) => {
                self.restart();
                Err(GuestFailure::new(
                    ErrorKind::Timeout,
                    format!(
                        "call exceeded {:.1}s and the worker was restarted",
                        timeout.as_secs_f64()
                    ),
                ))
            }
            Err(CallError::Exited) => {
                self.restart();
                Err(GuestFailure::new(
                    ErrorKind::ProtocolError,
                    "worker exited unexpectedly and was restarted",
                ))
            }
            Err(CallError::Protocol(message)) => {
                self.restart();
                Err(GuestFailure::new(ErrorKind::ProtocolError, message))
            }
        }
    }
}

impl GuestSession for ProcessSession {
    fn ping(&mut self) -> GuestResult<()> {
        self.call(Request::new(0, Op::Ping), self.limits.call_timeout)?
            .into_unit()
    }

    fn load_code(&mut self, code: &str, rng_seed: Option<u64>) -> GuestResult<()> {
        self.loaded = None;
        let mut req = Request::new(0, Op::Load);
        req.code = Some(code.to_string());
        req.rng_seed = rng_seed;
        let result = self.call(req, self.limits.load_timeout)?.into_unit();
        if result.is_ok() {
            self.loaded = Some((code.to_string(), rng_seed));
        }
        result
    }

    fn propose_action(&mut self, board: &str, rng_seed: Option<u64>) -> GuestResult<String> {
        let mut req = Request::new(0, Op::ProposeAction);
        req.board = Some(board.to_string());
        req.rng_seed = rng_seed;
        self.call(req, self.limits.call_timeout)?.into_text()
    }

    fn is_legal_action(&mut self, board: &str, action: &str) -> GuestResult<bool> {
        let mut req = Request::new(0, Op::IsLegalAction);
        req.board = Some(board.to_string());
        req.action = Some(action.to_string());
        self.call(req, self.limits.call_timeout)?.into_bool()
    }
}
