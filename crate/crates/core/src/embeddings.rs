//! Behavioral embeddings: the concatenated deterministic actions a policy
//! takes at a shared set of anchor states.
//!
//! Anchor states are drawn from a FIFO buffer of recently visited (filtered)
//! observations and are frozen between refreshes so that every agent and every
//! perturbation in a window is embedded against the same states.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::Trajectory;
use crate::error::{DvdError, Result};
use crate::kernels::KernelSpec;
use crate::policy::{ParamVector, PolicyArch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SelectionStrategy {
    Random,
    /// Greedy maximization of zero-mean GP posterior variance (SE kernel, l = 1).
    MaxVariance,
    /// Greedy log-determinant maximization under the configured kernel.
    GreedyDpp,
}

impl SelectionStrategy {
    pub const ALL: [SelectionStrategy; 3] = [
        SelectionStrategy::Random,
        SelectionStrategy::MaxVariance,
        SelectionStrategy::GreedyDpp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SelectionStrategy::Random => "random",
            SelectionStrategy::MaxVariance => "maxvar",
            SelectionStrategy::GreedyDpp => "dpp",
        }
    }
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionStrategy {
    type Err = DvdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SelectionStrategy::Random),
            "maxvar" | "zero" | "max_variance" => Ok(SelectionStrategy::MaxVariance),
            "dpp" | "greedy_dpp" => Ok(SelectionStrategy::GreedyDpp),
            other => Err(DvdError::Config(format!(
                "unknown strategy '{other}', valid: random, maxvar, dpp"
            ))),
        }
    }
}

/// Where an agent's embedding comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EmbeddingSource {
    /// Actions at the shared anchor states.
    Anchors,
    /// Actions along the agent's own deterministic rollout, zero-padded to
    /// the horizon. Used for the tabular MDP, where the action pair is the
    /// behavior.
    Trajectory,
}

impl FromStr for EmbeddingSource {
    type Err = DvdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "anchors" => Ok(EmbeddingSource::Anchors),
            "trajectory" => Ok(EmbeddingSource::Trajectory),
            other => Err(DvdError::Config(format!(
                "unknown embedding source '{other}', valid: anchors, trajectory"
            ))),
        }
    }
}

impl fmt::Display for EmbeddingSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingSource::Anchors => "anchors",
            EmbeddingSource::Trajectory => "trajectory",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub n_states: usize,
    pub strategy: SelectionStrategy,
    /// Re-sample anchors every this many iterations.
    pub update_every: usize,
    pub source: EmbeddingSource,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            n_states: 20,
            strategy: SelectionStrategy::Random,
            update_every: 20,
            source: EmbeddingSource::Anchors,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.update_every == 0 {
            return Err(DvdError::Config(
                "embedding n_states and update_every must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Bounded FIFO buffer of filtered observations.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBuffer {
    capacity: usize,
    dim: usize,
    states: VecDeque<Vec<f64>>,
}

impl StateBuffer {
    pub fn new(capacity: usize, dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(DvdError::InvalidArgument(
                "buffer capacity must be positive".into(),
            ));
        }
        Ok(StateBuffer {
            capacity,
            dim,
            states: VecDeque::with_capacity(capacity),
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn states(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.states.iter()
    }

    pub fn push(&mut self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.dim {
            return Err(DvdError::DimensionMismatch {
                expected: self.dim,
                got: obs.len(),
            });
        }
        if self.states.len() == self.capacity {
            self.states.pop_front();
        }
        self.states.push_back(obs.to_vec());
        Ok(())
    }

    /// Appends every observation of the trajectory, evicting the oldest.
    pub fn record_states(&mut self, trajectory: &Trajectory) -> Result<()> {
        if let Some(bad) = trajectory.observations.iter().find(|o| o.len() != self.dim) {
            return Err(DvdError::DimensionMismatch {
                expected: self.dim,
                got: bad.len(),
            });
        }
        for o in &trajectory.observations {
            self.push(o)?;
        }
        Ok(())
    }
}

/// Greedy maximization of `log det K[S, S]`: each step adds the candidate
/// with the largest conditional variance given the states already chosen
/// (incremental pivoted Cholesky). Ties go to the lowest buffer index.
fn greedy_logdet(states: &[&Vec<f64>], n: usize, kernel: &KernelSpec) -> Vec<usize> {
    let count = states.len();
    let mut residual: Vec<f64> = states.iter().map(|s| kernel.eval_unchecked(s, s)).collect();
    let mut rows: Vec<Vec<f64>> = vec![Vec::with_capacity(n); count];
    let mut chosen = Vec::with_capacity(n);
    let mut taken = vec![false; count];
    for _ in 0..n {
        let mut best = usize::MAX;
        for i in 0..count {
            if !taken[i] && (best == usize::MAX || residual[i] > residual[best]) {
                best = i;
            }
        }
        taken[best] = true;
        chosen.push(best);
        let pivot = residual[best];
        if pivot <= 1e-12 {
            // Every remaining candidate is already spanned; keep buffer order.
            continue;
        }
        let root = pivot.sqrt();
        let best_row = rows[best].clone();
        for i in 0..count {
            if taken[i] {
                continue;
            }
            let k = kernel.eval_unchecked(states[i], states[best]);
            let proj: f64 = rows[i].iter().zip(&best_row).map(|(a, b)| a * b).sum();
            let c = (k - proj) / root;
            rows[i].push(c);
            residual[i] = (residual[i] - c * c).max(0.0);
        }
    }
    chosen
}

/// Chooses `cfg.n_states` anchor states from the buffer. Falls back to the
/// whole buffer, in order, when it holds no more than `n_states` states.
pub fn select_anchors<R: Rng + ?Sized>(
    buffer: &StateBuffer,
    cfg: &EmbeddingConfig,
    kernel: &KernelSpec,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if buffer.is_empty() {
        return Err(DvdError::EmptyBuffer);
    }
    let states: Vec<&Vec<f64>> = buffer.states().collect();
    if states.len() <= cfg.n_states {
        return Ok(states.into_iter().cloned().collect());
    }
    let picked: Vec<usize> = match cfg.strategy {
        SelectionStrategy::Random => index::sample(rng, states.len(), cfg.n_states).into_vec(),
        SelectionStrategy::MaxVariance => {
            greedy_logdet(&states, cfg.n_states, &KernelSpec::default())
        }
        SelectionStrategy::GreedyDpp => greedy_logdet(&states, cfg.n_states, kernel),
    };
    Ok(picked.into_iter().map(|i| states[i].clone()).collect())
}

/// Flattened behavioral embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehavioralEmbedding(pub Vec<f64>);

impl BehavioralEmbedding {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Concatenates, in anchor order, the action the policy takes at each anchor.
pub fn embed(
    arch: &PolicyArch,
    params: &ParamVector,
    anchors: &[Vec<f64>],
) -> Result<BehavioralEmbedding> {
    if anchors.is_empty() {
        return Err(DvdError::InvalidArgument("no anchor states".into()));
    }
    let mut out = Vec::with_capacity(anchors.len() * arch.act_dim());
    for a in anchors {
        out.extend(arch.act(params, a)?);
    }
    Ok(BehavioralEmbedding(out))
}

pub(crate) fn embed_unchecked(arch: &PolicyArch, params: &[f64], anchors: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::with_capacity(anchors.len() * arch.act_dim());
    for a in anchors {
        out.extend(arch.act_unchecked(params, a));
    }
    out
}

/// Actions along a trajectory, zero-padded to `horizon * act_dim`.
pub fn trajectory_embedding(
    trajectory: &Trajectory,
    horizon: usize,
    act_dim: usize,
) -> BehavioralEmbedding {
    let mut out: Vec<f64> = trajectory.actions.iter().flatten().copied().collect();
    out.resize(horizon * act_dim, 0.0);
    BehavioralEmbedding(out)
}

pub fn refresh_due(iteration: usize, cfg: &EmbeddingConfig) -> bool {
    iteration % cfg.update_every == 0
}
