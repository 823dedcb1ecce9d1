//! Chat-completion clients and the game-playing prompt.
//!
//! [`HttpClient`] speaks the OpenAI-compatible chat-completions schema.
//! [`ScriptedClient`] returns canned replies and is what every offline test
//! and scripted training run uses.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::{debug, warn};

use crate::executor::serde_secs;
use crate::template;

pub const POLICY_TEMPLATE: &str = include_str!("../prompts/policy.txt");

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid client configuration: {0}")]
    Config(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider returned HTTP {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("scripted client: {0}")]
    Script(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    #[serde(with = "serde_secs")]
    pub request_timeout: Duration,
    pub max_retries: u32,
    /// Name of the environment variable holding the API key. The value is
    /// read at call time and never stored or logged.
    pub api_key_env_var_name: String,
    /// First retry delay; doubles on every further retry.
    #[serde(with = "serde_secs")]
    pub backoff_base: Duration,
    /// Shared request budget; `None` disables rate limiting.
    pub requests_per_minute: Option<u32>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-4o-mini".into(),
            temperature: 0.0,
            max_output_tokens: 4096,
            request_timeout: Duration::from_secs(120),
            max_retries: 3,
            api_key_env_var_name: "OPENAI_API_KEY".into(),
            backoff_base: Duration::from_secs(1),
            requests_per_minute: None,
        }
    }
}

impl LlmConfig {
    /// Defaults for code refinement.
    pub fn for_refinement() -> Self {
        LlmConfig::default()
    }

    /// Defaults for game play.
    pub fn for_play() -> Self {
        LlmConfig {
            temperature: 0.7,
            max_output_tokens: 1024,
            ..LlmConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.request_timeout.is_zero() {
            return Err(LlmError::Config("request_timeout must be positive".into()));
        }
        if self.endpoint_url.is_empty() || self.model_name.is_empty() {
            return Err(LlmError::Config("endpoint_url and model_name are required".into()));
        }
        if self.requests_per_minute == Some(0) {
            return Err(LlmError::Config("requests_per_minute must be positive".into()));
        }
        Ok(())
    }
}

/// One prompt/response pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub prompt: String,
    pub response: String,
    pub latency_secs: f64,
    pub input_tokens: Option<u64>,
    pub output_tokens: Option<u64>,
}

impl ChatExchange {
    fn offline(prompt: &str, response: String) -> Self {
        ChatExchange {
            prompt: prompt.to_string(),
            response,
            latency_secs: 0.0,
            input_tokens: None,
            output_tokens: None,
        }
    }

    /// Appends this exchange as one JSON line.
    pub fn append_jsonl(&self, path: &Path) -> std::io::Result<()> {
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut line = serde_json::to_string(self).map_err(std::io::Error::other)?;
        line.push('\n');
        file.write_all(line.as_bytes())
    }
}

pub trait LlmClient: Send + Sync {
    fn chat(&self, prompt: &str) -> Result<ChatExchange, LlmError>;
}

pub fn prompt_hash(prompt: &str) -> String {
    Sha256::digest(prompt.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

enum Script {
    Sequence(Vec<String>),
    ByHash(HashMap<String, String>),
}

/// Deterministic client serving canned replies.
pub struct ScriptedClient {
    script: Script,
    cursor: AtomicUsize,
    calls: AtomicUsize,
}

impl ScriptedClient {
    /// Replies are served in order, one per call.
    pub fn sequence(replies: Vec<String>) -> Self {
        ScriptedClient {
            script: Script::Sequence(replies),
            cursor: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
        }
    }

    /// Replies keyed by [`prompt_hash`] of the prompt.
    pub fn by_prompt_hash(replies: HashMap<String, String>) -> Self {
        ScriptedClient {
            script: Script::ByHash(replies),
            cursor: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
        }
    }

    /// Skips the first `offset` replies of a sequence.
    pub fn starting_at(self, offset: usize) -> Self {
        self.cursor.store(offset, Ordering::SeqCst);
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LlmClient for ScriptedClient {
    fn chat(&self, prompt: &str) -> Result<ChatExchange, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let reply = match &self.script {
            Script::Sequence(replies) => {
                let i = self.cursor.fetch_add(1, Ordering::SeqCst);
                replies
                    .get(i)
                    .cloned()
                    .ok_or_else(|| LlmError::Script(format!("no reply scripted for call {}", i + 1)))?
            }
            Script::ByHash(replies) => {
                let key = prompt_hash(prompt);
                replies
                    .get(&key)
                    .cloned()
                    .ok_or_else(|| LlmError::Script(format!("no reply for prompt {key}")))?
            }
        };
        Ok(ChatExchange::offline(prompt, reply))
    }
}

/// Token bucket shared by all calls on one client.
struct TokenBucket {
    capacity: f64,
    per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    fn new(per_minute: u32) -> Self {
        let capacity = f64::from(per_minute);
        TokenBucket {
            capacity,
            per_sec: capacity / 60.0,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().expect("bucket lock");
                let now = Instant::now();
                let refill = now.duration_since(state.1).as_secs_f64() * self.per_sec;
                *state = ((state.0 + refill).min(self.capacity), now);
                if state.0 >= 1.0 {
                    state.0 -= 1.0;
                    return;
                }
                (1.0 - state.0) / self.per_sec
            };
            thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

pub struct HttpClient {
    config: LlmConfig,
    http: reqwest::blocking::Client,
    bucket: Option<TokenBucket>,
}

impl HttpClient {
    pub fn new(config: LlmConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(config.request_timeout)
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        let bucket = config.requests_per_minute.map(TokenBucket::new);
        Ok(HttpClient {
            config,
            http,
            bucket,
        })
    }

    fn body(&self, prompt: &str) -> Value {
        json!({
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_tokens,
        })
    }

    fn api_key(&self) -> Result<Option<String>, LlmError> {
        let name = &self.config.api_key_env_var_name;
        if name.is_empty() {
            return Ok(None);
        }
        match std::env::var(name) {
            Ok(v) => Ok(Some(v)),
            Err(_) => Err(LlmError::Config(format!(
                "environment variable {name} is not set"
            ))),
        }
    }
}

fn transient(status: reqwest::StatusCode) -> bool {
    status == reqwest::StatusCode::TOO_MANY_REQUESTS || status.is_server_error()
}

fn truncate(text: &str, limit: usize) -> String {
    match text.char_indices().nth(limit) {
        Some((i, _)) => format!("{}...", &text[..i]),
        None => text.to_string(),
    }
}

fn parse_completion(prompt: &str, body: &Value, latency: Duration) -> Result<ChatExchange, LlmError> {
    let content = body
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| LlmError::Malformed("missing choices[0].message.content".into()))?;
    Ok(ChatExchange {
        prompt: prompt.to_string(),
        response: content.to_string(),
        latency_secs: latency.as_secs_f64(),
        input_tokens: body.pointer("/usage/prompt_tokens").and_then(Value::as_u64),
        output_tokens: body.pointer("/usage/completion_tokens").and_then(Value::as_u64),
    })
}

impl LlmClient for HttpClient {
    fn chat(&self, prompt: &str) -> Result<ChatExchange, LlmError> {
        let key = self.api_key()?;
        let body = self.body(prompt);
        let mut attempt = 0;
        loop {
            attempt += 1;
            if let Some(bucket) = &self.bucket {
                bucket.acquire();
            }
            let started = Instant::now();
            let mut request = self.http.post(&self.config.endpoint_url).json(&body);
            if let Some(key) = &key {
                request = request.bearer_auth(key);
            }
            let failure = match request.send() {
                Ok(resp) if resp.status().is_success() => {
                    let value: Value = resp
                        .json()
                        .map_err(|e| LlmError::Malformed(e.to_string()))?;
                    debug!(attempt, "chat completion received");
                    return parse_completion(prompt, &value, started.elapsed());
                }
                Ok(resp) if transient(resp.status()) => {
                    format!("HTTP {}", resp.status().as_u16())
                }
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    let text = resp.text().unwrap_or_default();
                    return Err(LlmError::Provider {
                        status,
                        body: truncate(&text, 500),
                    });
                }
                Err(e) => e.to_string(),
            };
            if attempt > self.config.max_retries {
                return Err(LlmError::Transport {
                    attempts: attempt,
                    message: failure,
                });
            }
            let delay = self.config.backoff_base * 2u32.saturating_pow(attempt - 1);
            warn!(attempt, reason = %failure, delay_secs = delay.as_secs_f64(), "retrying chat request");
            thread::sleep(delay);
        }
    }
}

/// The game-playing prompt for `player_id` observing `observation`.
pub fn build_policy_prompt(player_id: usize, observation: &str) -> String {
    let id = player_id.to_string();
    template::render(
        POLICY_TEMPLATE,
        &[("player_id", id.as_str()), ("observation", observation)],
    )
    .expect("policy template placeholders are fixed")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MoveParseError {
    #[error("reply has no <move></move> pair")]
    Missing,
    #[error("reply has unbalanced <move> tags")]
    Unbalanced,
}

/// Trimmed contents of the last `<move>...</move>` pair.
pub fn parse_move(response: &str) -> Result<String, MoveParseError> {
    const OPEN: &str = "<move>";
    const CLOSE: &str = "</move>";
    let opens = response.matches(OPEN).count();
    let closes = response.matches(CLOSE).count();
    if opens == 0 && closes == 0 {
        return Err(MoveParseError::Missing);
    }
    if opens != closes {
        return Err(MoveParseError::Unbalanced);
    }
    let close = response.rfind(CLOSE).ok_or(MoveParseError::Missing)?;
    let open = response[..close].rfind(OPEN).ok_or(MoveParseError::Unbalanced)?;
    if response[close..].contains(OPEN) {
        return Err(MoveParseError::Unbalanced);
    }
    Ok(response[open + OPEN.len()..close].trim().to_string())
}
