use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use codeharness::envs::registry;
use codeharness::eval::{self, AgentSpec, EvalConfig, ResolvedAgent, TranscriptLine};
use codeharness::harness::Agent;
use codeharness::trainer::{self, ExecutorConfig, TrainConfig};

#[derive(Parser)]
#[command(name = "codeharness", version, about = "Learn and evaluate code harnesses for text games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) a harness search.
    Train {
        /// JSON training config.
        #[arg(long, required_unless_present = "resume")]
        config: Option<PathBuf>,
        /// Override a config value, e.g. `rollout.n_envs=4`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Continue the run stored in this directory.
        #[arg(long, conflicts_with_all = ["config", "overrides"])]
        resume: Option<PathBuf>,
    },
    /// Run an evaluation suite and write report.csv / report.md.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Play one match, printing every observation and action.
    Play {
        #[arg(long)]
        game: String,
        /// Agent spec as JSON, one per seat; missing seats play randomly.
        #[arg(long = "agent", value_name = "JSON")]
        agents: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the match transcript (JSON lines) here.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// List the built-in games.
    ListEnvs,
    /// Re-render a match transcript written by `play`.
    Replay { transcript: PathBuf },
}

/// Errors caused by the invocation rather than by the work itself.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

/// Applies `key.path=value` to `root`. Every key must already exist;
/// values parse as JSON, falling back to a plain string.
fn apply_override(root: &mut Value, spec: &str) -> anyhow::Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| usage(format!("override `{spec}` is not KEY=VALUE")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = root;
    for part in key.split('.') {
        slot = slot
            .as_object_mut()
            .and_then(|o| o.get_mut(part))
            .ok_or_else(|| usage(format!("unknown config key `{key}`")))?;
    }
    *slot = value;
    Ok(())
}

/// Reads a config, fills defaults, applies overrides, and re-validates.
fn load_config<T: Serialize + DeserializeOwned>(
    path: &Path,
    overrides: &[String],
    keep: &[&str],
) -> anyhow::Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let raw: Value = serde_json::from_str(&text)
        .map_err(|e| usage(format!("config {} is not valid JSON: {e}", path.display())))?;
    let parsed: T = serde_json::from_value(raw.clone())
        .map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    let mut full = serde_json::to_value(&parsed)?;
    // Keys the config type does not serialize are carried over from the file.
    for key in keep {
        if let (Some(v), Some(obj)) = (raw.get(*key), full.as_object_mut()) {
            obj.insert((*key).to_string(), v.clone());
        }
    }
    for spec in overrides {
        apply_override(&mut full, spec)?;
    }
    serde_json::from_value(full).map_err(|e| usage(format!("config after overrides: {e}")))
}

fn print_json(value: &impl Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::ListEnvs => {
            println!("{:<18} {:>7}  action space", "game_id", "players");
            for spec in registry() {
                println!("{:<18} {:>7}  {}", spec.game_id, spec.players, spec.action_space_description);
            }
        }
        Command::Train {
            config,
            overrides,
            resume,
        } => {
            let artifacts = match (resume, config) {
                (Some(dir), _) => trainer::resume(&dir)?,
                (None, Some(path)) => {
                    let cfg: TrainConfig = load_config(&path, &overrides, &["run_dir"])?;
                    if cfg.run_dir.as_os_str().is_empty() {
                        return Err(usage("config needs a run_dir"));
                    }
                    trainer::train(cfg)?
                }
                (None, None) => return Err(usage("train needs --config or --resume")),
            };
            print_json(&serde_json::json!({
                "best_node_id": artifacts.best_node_id,
                "best_heuristic": artifacts.best_heuristic,
                "iterations_used": artifacts.iterations_used,
                "stop_reason": artifacts.stop_reason,
                "tree": artifacts.tree_path,
            }))?;
        }
        Command::Eval { config, overrides } => {
            let cfg: EvalConfig = load_config(&config, &overrides, &[])?;
            let reports = eval::run_eval(&cfg)?;
            print!("{}", eval::render_markdown(&reports));
        }
        Command::Play {
            game,
            agents,
            seed,
            transcript,
        } => {
            let spec = codeharness::envs::game_spec(&game).map_err(|e| usage(e.to_string()))?;
            if agents.len() > spec.players {
                return Err(usage(format!("{game} has {} seat(s)", spec.players)));
            }
            let executor = ExecutorConfig::default().build();
            let mut seats: Vec<Box<dyn Agent>> = Vec::new();
            for seat in 0..spec.players {
                let agent_spec: AgentSpec = match agents.get(seat) {
                    Some(json) => serde_json::from_str(json)
                        .map_err(|e| usage(format!("agent {seat}: {e}")))?,
                    None => AgentSpec::Random,
                };
                let resolved = ResolvedAgent::resolve(&agent_spec, &game)?;
                seats.push(resolved.build(&game, executor.as_ref(), None)?);
            }
            let mut out = std::io::stdout().lock();
            let lines = eval::play_logged(&mut seats, &game, seed, &mut |line| {
                let _ = write!(out, "{}", eval::render_turn(line));
            })?;
            if let Some(path) = transcript {
                let mut text = String::new();
                for line in &lines {
                    text.push_str(&serde_json::to_string(line)?);
                    text.push('\n');
                }
                fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Replay { transcript } => {
            let text = fs::read_to_string(&transcript)
                .map_err(|e| usage(format!("cannot read {}: {e}", transcript.display())))?;
            for (i, raw) in text.lines().enumerate() {
                let line: TranscriptLine = serde_json::from_str(raw)
                    .map_err(|e| anyhow!("{} line {}: {e}", transcript.display(), i + 1))?;
                print!("{}", eval::render_turn(&line));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Usage>() => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
