//! Mechanical critic and the refinement step.
//!
//! The critic turns sampled failure records into feedback text and decides
//! which guest functions need work. The refiner renders the refinement
//! prompt, asks the model, and extracts the new code.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envs::GameSpec;
use crate::executor::{ErrorKind, GuestFunction};
use crate::fixtures;
use crate::llm::{LlmClient, LlmError};
use crate::rollout::{EnvVerdict, FailureRecord, GuestVerdict};
use crate::template::{self, TemplateError};
use crate::tree::Mode;

pub const REFINEMENT_TEMPLATE: &str = include_str!("../prompts/refinement.txt");

/// Boards longer than this many characters are cut in feedback.
pub const BOARD_FEEDBACK_LIMIT: usize = 4000;

pub const NO_ERROR_NOTE: &str = "No errors were observed in the sampled rollout steps.\n";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineTargets {
    pub functions: BTreeSet<GuestFunction>,
}

impl RefineTargets {
    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.functions.iter().map(|f| f.name()).collect()
    }
}

/// Functions implicated by one failure record.
pub fn targets_for(failure: &FailureRecord) -> BTreeSet<GuestFunction> {
    use GuestFunction::{IsLegalAction, ProposeAction};
    match (failure.guest_verdict, failure.env_verdict) {
        (GuestVerdict::Accepted, Some(EnvVerdict::Illegal)) => [ProposeAction, IsLegalAction].into(),
        (GuestVerdict::Rejected, Some(EnvVerdict::Illegal)) => [ProposeAction].into(),
        (GuestVerdict::Rejected, Some(EnvVerdict::Legal)) => [IsLegalAction].into(),
        (GuestVerdict::Accepted, _) | (GuestVerdict::Rejected, None) => BTreeSet::new(),
        (GuestVerdict::Error, env) => {
            let mut set: BTreeSet<_> = match failure.failed_function {
                Some(f) => [f].into(),
                // Load failures implicate the whole module.
                None => GuestFunction::ALL.into(),
            };
            if env == Some(EnvVerdict::Illegal) {
                set.insert(ProposeAction);
            }
            set
        }
    }
}

pub fn decide_targets(failures: &[FailureRecord]) -> RefineTargets {
    RefineTargets {
        functions: failures.iter().flat_map(targets_for).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FailureCategory {
    IllegalAccepted,
    IllegalProposed,
    LegalRejected,
    GuestException,
    Timeout,
    Parse,
}

impl FailureCategory {
    pub fn of(failure: &FailureRecord) -> Option<FailureCategory> {
        match failure.guest_verdict {
            GuestVerdict::Error => Some(match failure.error_kind {
                Some(ErrorKind::Timeout) => FailureCategory::Timeout,
                Some(ErrorKind::GuestException) | Some(ErrorKind::ResourceLimit) => {
                    FailureCategory::GuestException
                }
                _ => FailureCategory::Parse,
            }),
            GuestVerdict::Accepted => match failure.env_verdict {
                Some(EnvVerdict::Illegal) => Some(FailureCategory::IllegalAccepted),
                _ => None,
            },
            GuestVerdict::Rejected => match failure.env_verdict {
                Some(EnvVerdict::Illegal) => Some(FailureCategory::IllegalProposed),
                Some(EnvVerdict::Legal) => Some(FailureCategory::LegalRejected),
                None => None,
            },
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FailureCategory::IllegalAccepted => "illegal-accepted",
            FailureCategory::IllegalProposed => "illegal-proposed",
            FailureCategory::LegalRejected => "legal-rejected",
            FailureCategory::GuestException => "guest-exception",
            FailureCategory::Timeout => "timeout",
            FailureCategory::Parse => "parse",
        }
    }

    fn summary(self) -> &'static str {
        match self {
            FailureCategory::IllegalAccepted => {
                "propose_action returned an illegal action and is_legal_action returned True for it"
            }
            FailureCategory::IllegalProposed => {
                "propose_action returned an illegal action; is_legal_action correctly returned False"
            }
            FailureCategory::LegalRejected => {
                "is_legal_action returned False for an action the game accepted as legal"
            }
            FailureCategory::GuestException => "the code raised an exception",
            FailureCategory::Timeout => "a function call did not finish within the time limit",
            FailureCategory::Parse => {
                "the code could not be loaded or returned a value of the wrong type"
            }
        }
    }
}

fn truncated_board(board: &str) -> String {
    match board.char_indices().nth(BOARD_FEEDBACK_LIMIT) {
        Some((cut, _)) => {
            let dropped = board[cut..].chars().count();
            format!("{}\n[board truncated: {dropped} more characters]", &board[..cut])
        }
        None => board.to_string(),
    }
}

fn verdict_text(failure: &FailureRecord) -> &'static str {
    match failure.guest_verdict {
        GuestVerdict::Accepted => "True",
        GuestVerdict::Rejected => "False",
        GuestVerdict::Error => "error",
    }
}

/// Deterministic feedback text for the `{tasks_with_feedback}` placeholder.
pub fn consolidate_feedback(failures: &[FailureRecord], targets: &RefineTargets) -> String {
    let mut groups: Vec<(FailureCategory, Vec<&FailureRecord>)> = Vec::new();
    for failure in failures {
        let Some(cat) = FailureCategory::of(failure) else {
            continue;
        };
        match groups.iter_mut().find(|(c, _)| *c == cat) {
            Some((_, list)) => list.push(failure),
            None => groups.push((cat, vec![failure])),
        }
    }
    if groups.is_empty() {
        return NO_ERROR_NOTE.to_string();
    }
    groups.sort_by_key(|(c, _)| *c);

    let mut out = String::new();
    if !targets.is_empty() {
        let _ = writeln!(out, "Functions to refine: {}", targets.names().join(", "));
        out.push('\n');
    }
    for (cat, list) in groups {
        let _ = writeln!(out, "### {} ({} step(s)): {}", cat.label(), list.len(), cat.summary());
        for (i, f) in list.iter().enumerate() {
            let _ = writeln!(
                out,
                "\nStep {} (environment {}, step {}):",
                i + 1,
                f.env_index,
                f.step_index
            );
            let _ = writeln!(out, "Game board:\n{}", truncated_board(&f.board));
            if !f.action.is_empty() {
                let _ = writeln!(out, "Action: {}", f.action);
            }
            if let Some(func) = f.failed_function {
                let _ = writeln!(out, "Failing function: {func}");
            }
            let _ = writeln!(out, "is_legal_action verdict: {}", verdict_text(f));
            match f.env_verdict {
                Some(EnvVerdict::Legal) => out.push_str("Game verdict: legal\n"),
                Some(EnvVerdict::Illegal) => out.push_str("Game verdict: illegal\n"),
                None => {}
            }
            if let Some(kind) = f.error_kind {
                let _ = writeln!(out, "Error kind: {kind}");
            }
            if !f.error_message.is_empty() {
                let _ = writeln!(out, "Message: {}", f.error_message);
            }
            if !f.traceback.is_empty() {
                let _ = writeln!(out, "Traceback:\n{}", f.traceback.trim_end());
            }
        }
        out.push('\n');
    }
    out
}

/// Values for the refinement template's placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub name: String,
    pub description: String,
    pub action_space: String,
    pub tasks_with_feedback: String,
    pub code: String,
    pub code_signatures: String,
}

pub fn build_refinement_prompt(bundle: &PromptBundle) -> Result<String, TemplateError> {
    template::render_strict(
        REFINEMENT_TEMPLATE,
        &[
            ("name", &bundle.name),
            ("description", &bundle.description),
            ("action_space", &bundle.action_space),
            ("tasks_with_feedback", &bundle.tasks_with_feedback),
            ("code", &bundle.code),
            ("code_signatures", &bundle.code_signatures),
        ],
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("reply contains no ```python code block")]
    NoCodeBlock,
    #[error("code block does not define {0}")]
    MissingFunction(&'static str),
}

/// Body of the last ```python fenced block; it must define both functions.
pub fn extract_code(response: &str) -> Result<String, ExtractError> {
    let mut last = None;
    let mut current: Option<Vec<&str>> = None;
    for line in response.split('\n') {
        let bare = line.trim_end_matches('\r');
        match current.as_mut() {
            None if bare.trim_start().starts_with("```python") => current = Some(Vec::new()),
            None => {}
            Some(body) if bare.trim() == "```" => {
                last = Some(body.join("\n"));
                current = None;
            }
            Some(body) => body.push(line),
        }
    }
    let code = last.ok_or(ExtractError::NoCodeBlock)?;
    for f in GuestFunction::ALL {
        if !code.contains(&format!("def {}", f.name())) {
            return Err(ExtractError::MissingFunction(f.name()));
        }
    }
    Ok(code)
}

#[derive(Debug, Error)]
pub enum RefineError {
    #[error(transparent)]
    Prompt(#[from] TemplateError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
}

/// Everything one refinement produced, kept for audit even on failure.
#[derive(Debug)]
pub struct Refinement {
    pub targets: RefineTargets,
    pub prompt: Option<String>,
    pub response: Option<String>,
    pub code: Result<String, RefineError>,
}

/// Critic then refiner: returns the child code text, verbatim from the
/// model's last code block.
pub fn refine(
    code: &str,
    failures: &[FailureRecord],
    game: &GameSpec,
    mode: Mode,
    llm: &dyn LlmClient,
) -> Refinement {
    let targets = decide_targets(failures);
    let bundle = PromptBundle {
        name: game.game_id.clone(),
        description: game.description.clone(),
        action_space: game.action_space_description.clone(),
        tasks_with_feedback: consolidate_feedback(failures, &targets),
        code: code.to_string(),
        code_signatures: fixtures::signatures(mode).to_string(),
    };
    let mut out = Refinement {
        targets,
        prompt: None,
        response: None,
        code: Err(RefineError::Extract(ExtractError::NoCodeBlock)),
    };
    let prompt = match build_refinement_prompt(&bundle) {
        Ok(p) => p,
        Err(e) => {
            out.code = Err(e.into());
            return out;
        }
    };
    out.prompt = Some(prompt.clone());
    match llm.chat(&prompt) {
        Ok(exchange) => {
            out.code = extract_code(&exchange.response).map_err(RefineError::from);
            out.response = Some(exchange.response);
        }
        Err(e) => out.code = Err(e.into()),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedClient;
    use proptest::prelude::*;
    use GuestFunction::{IsLegalAction, ProposeAction};

    fn record(guest: GuestVerdict, env: Option<EnvVerdict>) -> FailureRecord {
        FailureRecord {
            env_index: 0,
            step_index: 0,
            board: "board".into(),
            action: "[0 0]".into(),
            guest_verdict: guest,
            env_verdict: env,
            error_kind: None,
            failed_function: None,
            error_message: String::new(),
            traceback: String::new(),
        }
    }

    fn errored(function: GuestFunction, env: Option<EnvVerdict>) -> FailureRecord {
        FailureRecord {
            error_kind: Some(ErrorKind::GuestException),
            failed_function: Some(function),
            error_message: "x".into(),
            ..record(GuestVerdict::Error, env)
        }
    }

    fn set(fs: &[GuestFunction]) -> BTreeSet<GuestFunction> {
        fs.iter().copied().collect()
    }

    #[test]
    fn targeting_truth_table() {
        use EnvVerdict::*;
        use GuestVerdict::*;
        let cases = [
            (record(Accepted, Some(Illegal)), set(&[ProposeAction, IsLegalAction])),
            (record(Rejected, Some(Illegal)), set(&[ProposeAction])),
            (record(Rejected, Some(Legal)), set(&[IsLegalAction])),
            (record(Accepted, Some(Legal)), set(&[])),
            (errored(IsLegalAction, Some(Legal)), set(&[IsLegalAction])),
            (errored(IsLegalAction, Some(Illegal)), set(&[ProposeAction, IsLegalAction])),
            (errored(ProposeAction, None), set(&[ProposeAction])),
        ];
        for (failure, expected) in cases {
            assert_eq!(decide_targets(&[failure.clone()]).functions, expected, "{failure:?}");
        }
        let load = FailureRecord {
            error_kind: Some(ErrorKind::CompileError),
            ..record(Error, None)
        };
        assert_eq!(decide_targets(&[load]).functions, set(&GuestFunction::ALL));
        let mixed = [record(Rejected, Some(Illegal)), record(Rejected, Some(Legal))];
        assert_eq!(decide_targets(&mixed).functions, set(&GuestFunction::ALL));
        assert!(decide_targets(&[]).is_empty());
    }

    #[test]
    fn feedback_groups_in_fixed_order() {
        assert_eq!(consolidate_feedback(&[], &RefineTargets::default()), NO_ERROR_NOTE);

        let same = vec![record(GuestVerdict::Rejected, Some(EnvVerdict::Illegal)); 5];
        let text = consolidate_feedback(&same, &decide_targets(&same));
        assert_eq!(text.matches("### ").count(), 1);
        assert!(text.contains("### illegal-proposed (5 step(s))"));
        assert_eq!(text.matches("Game board:").count(), 5);

        let mixed = vec![
            errored(ProposeAction, None),
            record(GuestVerdict::Accepted, Some(EnvVerdict::Illegal)),
        ];
        let text = consolidate_feedback(&mixed, &decide_targets(&mixed));
        let a = text.find("### illegal-accepted").unwrap();
        let b = text.find("### guest-exception").unwrap();
        assert!(a < b);
        assert!(text.starts_with("Functions to refine: propose_action, is_legal_action\n"));
        assert_eq!(text, consolidate_feedback(&mixed, &decide_targets(&mixed)));
    }

    #[test]
    fn long_boards_are_truncated() {
        let mut f = record(GuestVerdict::Accepted, Some(EnvVerdict::Illegal));
        f.board = "é".repeat(BOARD_FEEDBACK_LIMIT + 10);
        let text = consolidate_feedback(&[f], &RefineTargets::default());
        assert!(text.contains("[board truncated: 10 more characters]"));
        assert_eq!(text.matches('é').count(), BOARD_FEEDBACK_LIMIT);
    }

    fn bundle() -> PromptBundle {
        PromptBundle {
            name: "nim".into(),
            description: "d".into(),
            action_space: "a".into(),
            tasks_with_feedback: "t".into(),
            code: "def f(): return {1: 2}".into(),
            code_signatures: "s".into(),
        }
    }

    #[test]
    fn prompt_rendering() {
        let p = build_refinement_prompt(&bundle()).unwrap();
        assert!(p.contains("Make sure to follow these function signatures.\n"));
        assert!(p.contains("def f(): return {1: 2}"));
        for key in ["{name}", "{description}", "{code}", "{tasks_with_feedback}"] {
            assert!(!p.contains(key));
        }
        let empty = PromptBundle {
            description: String::new(),
            ..bundle()
        };
        assert!(build_refinement_prompt(&empty).is_err());
    }

    proptest! {
        #[test]
        fn prompt_is_injective_in_feedback(a in ".{1,40}", b in ".{1,40}") {
            prop_assume!(a != b);
            let pa = build_refinement_prompt(&PromptBundle { tasks_with_feedback: a, ..bundle() }).unwrap();
            let pb = build_refinement_prompt(&PromptBundle { tasks_with_feedback: b, ..bundle() }).unwrap();
            prop_assert_ne!(pa, pb);
        }
    }

    #[test]
    fn extraction_cases() {
        let code = fixtures::constant_harness("[1]", true);
        let reply = fixtures::as_llm_reply(&code);
        assert_eq!(extract_code(&reply).unwrap(), code);

        let two = format!("```python\nold\n```\nthen\n```python\n{code}\n```");
        assert_eq!(extract_code(&two).unwrap(), code);
        assert_eq!(extract_code("just prose"), Err(ExtractError::NoCodeBlock));
        assert_eq!(
            extract_code("```python\ndef propose_action(b):\n  pass\n```"),
            Err(ExtractError::MissingFunction("is_legal_action"))
        );
    }

    #[test]
    fn refine_returns_fixture_verbatim() {
        let game = crate::envs::game_spec("nim").unwrap();
        let oracle = fixtures::oracle_harness("nim");
        let client = ScriptedClient::sequence(vec![fixtures::as_llm_reply(&oracle)]);
        let failures = [record(GuestVerdict::Rejected, Some(EnvVerdict::Illegal))];
        let out = refine(&fixtures::stub_code(Mode::Verifier), &failures, &game, Mode::Verifier, &client);
        assert_eq!(out.code.unwrap(), oracle);
        assert_eq!(out.targets.functions, set(&[ProposeAction]));
        assert!(out.prompt.unwrap().contains("Functions to refine: propose_action\n"));

        let client = ScriptedClient::sequence(vec!["no code".into()]);
        let out = refine("x", &failures, &game, Mode::Verifier, &client);
        assert!(matches!(out.code, Err(RefineError::Extract(ExtractError::NoCodeBlock))));
        assert_eq!(out.response.as_deref(), Some("no code"));
    }
}
