//! The tree of code hypotheses and Thompson-sampling node selection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rollout::RolloutReport;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("root code is empty")]
    EmptyCode,
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("invalid selection config: {0}")]
    InvalidConfig(String),
}

/// What a harness is trained for. Verifier harnesses are scored on legal
/// move rate; policy harnesses on reward gated by legality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Verifier,
    Policy,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub steps_attempted: u64,
    pub steps_legal: u64,
    pub exec_failures: u64,
    /// Per-trajectory scores, each 0 or in [0.5, 1]. Policy mode only.
    pub trajectory_heuristics: Vec<f64>,
    pub heuristic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeHypothesis {
    pub node_id: usize,
    pub parent_id: Option<usize>,
    pub code: String,
    pub created_at_iteration: u64,
    pub stats: NodeStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub heuristic_weight: f64,
    pub prior_alpha: f64,
    pub prior_beta: f64,
    pub rng_seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            heuristic_weight: 1.0,
            prior_alpha: 1.0,
            prior_beta: 1.0,
            rng_seed: 0,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), TreeError> {
        let finite = [self.heuristic_weight, self.prior_alpha, self.prior_beta]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.heuristic_weight < 0.0 {
            return Err(TreeError::InvalidConfig(
                "heuristic weight must be a finite non-negative number".into(),
            ));
        }
        if self.prior_alpha <= 0.0 || self.prior_beta <= 0.0 {
            return Err(TreeError::InvalidConfig("priors must be positive".into()));
        }
        Ok(())
    }
}

/// Fraction of legal steps; zero when nothing was attempted.
pub fn legal_rate<T: Scalar>(legal: u64, attempted: u64) -> T {
    if attempted == 0 {
        T::zero()
    } else {
        T::from_count(legal) / T::from_count(attempted)
    }
}

/// Score of one policy trajectory: 0 if it took an illegal action,
/// otherwise `0.5 + 0.5 * reward` for a final reward in [0, 1].
pub fn trajectory_score<T: Scalar>(took_illegal: bool, reward: T) -> T {
    if took_illegal {
        T::zero()
    } else {
        T::half() + T::half() * reward
    }
}

/// Arithmetic mean; zero for an empty slice.
pub fn mean<T: Scalar>(values: &[T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    let total = values.iter().fold(T::zero(), |acc, &v| acc + v);
    total / T::from_count(values.len() as u64)
}

pub fn heuristic_value(stats: &NodeStats, mode: Mode) -> f64 {
    match mode {
        Mode::Verifier => legal_rate(stats.steps_legal, stats.steps_attempted),
        Mode::Policy => mean(&stats.trajectory_heuristics),
    }
}

/// Posterior pseudo-counts `(successes, failures)` for a node.
fn evidence(stats: &NodeStats, mode: Mode) -> (f64, f64) {
    match mode {
        Mode::Verifier => {
            let legal = stats.steps_legal as f64;
            (legal, stats.steps_attempted as f64 - legal)
        }
        Mode::Policy => {
            let total: f64 = stats.trajectory_heuristics.iter().sum();
            (total, stats.trajectory_heuristics.len() as f64 - total)
        }
    }
}

/// Index of the largest value, preferring the last of equal maxima.
fn argmax_latest(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, v) in values.into_iter().enumerate() {
        if v >= best.0 {
            best = (v, i);
        }
    }
    best.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisTree {
    mode: Mode,
    nodes: Vec<CodeHypothesis>,
}

impl HypothesisTree {
    pub fn new(root_code: &str, mode: Mode) -> Result<Self, TreeError> {
        if root_code.trim().is_empty() {
            return Err(TreeError::EmptyCode);
        }
        Ok(HypothesisTree {
            mode,
            nodes: vec![CodeHypothesis {
                node_id: 0,
                parent_id: None,
                code: root_code.to_string(),
                created_at_iteration: 0,
                stats: NodeStats::default(),
            }],
        })
    }

    /// Rebuilds a tree from persisted nodes, checking structural invariants.
    pub fn from_nodes(mode: Mode, nodes: Vec<CodeHypothesis>) -> Result<Self, TreeError> {
        for (i, node) in nodes.iter().enumerate() {
            if node.node_id != i {
                return Err(TreeError::UnknownNode(node.node_id));
            }
            match (i, node.parent_id) {
                (0, None) => {}
                (0, Some(p)) => return Err(TreeError::UnknownNode(p)),
                (_, Some(p)) if p < i => {}
                (_, p) => return Err(TreeError::UnknownNode(p.unwrap_or(usize::MAX))),
            }
        }
        if nodes.is_empty() {
            return Err(TreeError::EmptyCode);
        }
        Ok(HypothesisTree { mode, nodes })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[CodeHypothesis] {
        &self.nodes
    }

    pub fn node(&self, node_id: usize) -> Result<&CodeHypothesis, TreeError> {
        self.nodes.get(node_id).ok_or(TreeError::UnknownNode(node_id))
    }

    pub fn children(&self, node_id: usize) -> impl Iterator<Item = &CodeHypothesis> {
        self.nodes
            .iter()
            .filter(move |n| n.parent_id == Some(node_id))
    }

    pub fn add_child(
        &mut self,
        parent_id: usize,
        code: &str,
        iteration: u64,
    ) -> Result<usize, TreeError> {
        self.node(parent_id)?;
        let node_id = self.nodes.len();
        self.nodes.push(CodeHypothesis {
            node_id,
            parent_id: Some(parent_id),
            code: code.to_string(),
            created_at_iteration: iteration,
            stats: NodeStats::default(),
        });
        Ok(node_id)
    }

    /// Accumulates a rollout into a node and recomputes its heuristic.
    pub fn update_stats(
        &mut self,
        node_id: usize,
        report: &RolloutReport,
    ) -> Result<&NodeStats, TreeError> {
        let mode = self.mode;
        let node = self
            .nodes
            .get_mut(node_id)
            .ok_or(TreeError::UnknownNode(node_id))?;
        let stats = &mut node.stats;
        stats.steps_attempted += report.steps_attempted;
        stats.steps_legal += report.steps_legal;
        stats.exec_failures += report.exec_failures;
        stats
            .trajectory_heuristics
            .extend_from_slice(&report.trajectory_heuristics);
        stats.heuristic = heuristic_value(stats, mode);
        Ok(stats)
    }

    /// Thompson sampling with a generator seeded from `config.rng_seed`.
    pub fn select_node(&self, config: &SelectionConfig) -> Result<usize, TreeError> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        self.select_node_with(config, &mut rng)
    }

    /// Draws one Beta posterior sample per node and returns the argmax;
    /// exact ties go to the newer node.
    pub fn select_node_with<R: Rng + ?Sized>(
        &self,
        config: &SelectionConfig,
        rng: &mut R,
    ) -> Result<usize, TreeError> {
        config.validate()?;
        if self.nodes.len() == 1 {
            return Ok(0);
        }
        let w = config.heuristic_weight;
        let mut samples = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let (successes, failures) = evidence(&node.stats, self.mode);
            let posterior = Beta::new(
                config.prior_alpha + w * successes,
                config.prior_beta + w * failures,
            )
            .map_err(|e| TreeError::InvalidConfig(e.to_string()))?;
            samples.push(posterior.sample(rng));
        }
        Ok(argmax_latest(samples))
    }

    /// Node with the highest heuristic; ties go to the older node.
    pub fn best(&self) -> &CodeHypothesis {
        self.nodes
            .iter()
            .fold(&self.nodes[0], |best, n| {
                if n.stats.heuristic > best.stats.heuristic {
                    n
                } else {
                    best
                }
            })
    }
}
