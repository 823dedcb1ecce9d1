//! Search over executable game harnesses refined by a language model.
//!
//! A harness is a pair of guest functions, `propose_action` and
//! `is_legal_action`, run in an isolated executor. Candidate harnesses form
//! a tree; Thompson sampling picks which one to refine next from evidence
//! gathered by parallel rollouts against reference environments.

pub mod board;
pub mod critic;
pub mod envs;
pub mod eval;
pub mod executor;
pub mod fixtures;
pub mod harness;
pub mod llm;
pub mod rollout;
pub mod scalar;
pub mod template;
pub mod trainer;
pub mod tree;

/// Heuristic scores in the floating-point domain used at runtime.
pub type Score = f64;
/// Heuristic scores computed without rounding.
pub type ExactScore = num_rational::Ratio<i64>;
