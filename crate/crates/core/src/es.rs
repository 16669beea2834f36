//! Evolution-strategies optimizers: vanilla ES (Gaussian smoothing), NSR-ES
//! (one agent per iteration, reward mixed with novelty), and DvD-ES (joint
//! update of the whole population, reward mixed with the determinant
//! diversity of each column of perturbations).
//!
//! An iteration draws all perturbations up front from `(seed, iteration)`,
//! evaluates the `M x k` perturbed policies as independent tasks on a worker
//! pool, gathers them into a dense table and reduces in fixed `(m, i)` order.
//! Results are therefore independent of the worker count.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandit::{reward_signal, BanditState, DEFAULT_LAMBDAS};
use crate::diversity::novelty_against;
use crate::embeddings::{
    embed_unchecked, refresh_due, select_anchors, trajectory_embedding, EmbeddingConfig,
    EmbeddingSource, StateBuffer,
};
use crate::envs::{rollout_frozen, Env, StateFilter, Trajectory, DEFAULT_HIDDEN};
use crate::error::{DvdError, Result};
use crate::kernels::{gram, KernelSpec};
use crate::policy::{ParamVector, PolicyArch};

// RNG stream ids; perturbation blocks use `STREAM_BLOCK + iteration`.
const STREAM_INIT: u64 = 1;
const STREAM_ANCHORS: u64 = 2;
const STREAM_NSR: u64 = 3;
const STREAM_BANDIT: u64 = 4;
const STREAM_BLOCK: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algo {
    Vanilla,
    NsrEs,
    DvdEs,
}

impl Algo {
    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Vanilla => "vanilla",
            Algo::NsrEs => "nsr",
            Algo::DvdEs => "dvd",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algo {
    type Err = DvdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" | "es" => Ok(Algo::Vanilla),
            "nsr" | "nsres" | "nsr-es" => Ok(Algo::NsrEs),
            "dvd" | "dvdes" | "dvd-es" => Ok(Algo::DvdEs),
            other => Err(DvdError::Config(format!(
                "unknown algo '{other}', valid: vanilla, nsr, dvd"
            ))),
        }
    }
}

/// Population initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InitMode {
    /// Every agent starts from the same parameter draw.
    Shared,
    /// Each agent gets its own draw.
    Independent,
}

impl FromStr for InitMode {
    type Err = DvdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(InitMode::Shared),
            "independent" => Ok(InitMode::Independent),
            other => Err(DvdError::Config(format!(
                "unknown init '{other}', valid: shared, independent"
            ))),
        }
    }
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitMode::Shared => "shared",
            InitMode::Independent => "independent",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsConfig {
    pub sigma: f64,
    pub eta: f64,
    /// Sensings per agent per iteration.
    pub k: usize,
    /// Population size.
    pub m: usize,
    pub iterations: usize,
    pub algo: Algo,
    /// When set, the bandit is bypassed and this trade-off is used throughout.
    pub fixed_lambda: Option<f64>,
    /// Arms of the trade-off bandit.
    pub lambda_arms: Vec<f64>,
    pub kernel: KernelSpec,
    pub embedding: EmbeddingConfig,
    pub seed: u64,
    /// Mirrored sampling: odd-indexed perturbations negate their predecessor.
    pub antithetic: bool,
    pub init: InitMode,
    pub hidden: usize,
    /// State buffer capacity; defaults to `10 * H * M`.
    pub buffer_capacity: Option<usize>,
    pub record_wall_time: bool,
}

impl Default for EsConfig {
    fn default() -> Self {
        EsConfig {
            sigma: 0.1,
            eta: 0.05,
            k: 100,
            m: 5,
            iterations: 200,
            algo: Algo::DvdEs,
            fixed_lambda: None,
            lambda_arms: DEFAULT_LAMBDAS.to_vec(),
            kernel: KernelSpec::default(),
            embedding: EmbeddingConfig::default(),
            seed: 0,
            antithetic: false,
            init: InitMode::Shared,
            hidden: DEFAULT_HIDDEN,
            buffer_capacity: None,
            record_wall_time: false,
        }
    }
}

impl EsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DvdError::Config(msg));
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be non-negative, got {}", self.eta));
        }
        if self.k == 0 || self.m == 0 {
            return bad("k and m must be at least 1".into());
        }
        if let Some(l) = self.fixed_lambda {
            if !(0.0..1.0).contains(&l) {
                return bad(format!("fixed_lambda must lie in [0, 1), got {l}"));
            }
        }
        if self.algo == Algo::NsrEs && self.m < 2 {
            return bad("NSR-ES needs a population of at least 2".into());
        }
        if self.hidden == 0 {
            return bad("hidden width must be positive".into());
        }
        if self.buffer_capacity == Some(0) {
            return bad("buffer capacity must be positive".into());
        }
        self.kernel
            .validate()
            .map_err(|e| DvdError::Config(e.to_string()))?;
        self.embedding.validate()?;
        BanditState::new(&self.lambda_arms, 0).map_err(|e| DvdError::Config(e.to_string()))?;
        Ok(())
    }
}

/// Z-scores. Returns zeros when the standard deviation is below 1e-12.
pub fn normalize_scores(scores: &[f64]) -> Vec<f64> {
    let n = scores.len() as f64;
    if scores.is_empty() {
        return Vec::new();
    }
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std >= 1e-12) {
        return vec![0.0; scores.len()];
    }
    scores.iter().map(|s| (s - mean) / std).collect()
}

/// Standard Gaussian perturbations `g[m][i]` for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationBlock {
    pub g: Vec<Vec<Vec<f64>>>,
}

impl PerturbationBlock {
    /// Draws `m * k` vectors of length `d`, determined by `(seed, iteration)`.
    pub fn draw(
        seed: u64,
        iteration: usize,
        m: usize,
        k: usize,
        d: usize,
        antithetic: bool,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(STREAM_BLOCK + iteration as u64);
        Self::draw_from(&mut rng, m, k, d, antithetic)
    }

    pub fn draw_from<R: Rng + ?Sized>(
        rng: &mut R,
        m: usize,
        k: usize,
        d: usize,
        antithetic: bool,
    ) -> Self {
        let g = (0..m)
            .map(|_| {
                let mut agent: Vec<Vec<f64>> = Vec::with_capacity(k);
                for i in 0..k {
                    if antithetic && i % 2 == 1 {
                        let prev: Vec<f64> = agent[i - 1].iter().map(|v| -v).collect();
                        agent.push(prev);
                    } else {
                        agent.push((0..d).map(|_| rng.sample(StandardNormal)).collect());
                    }
                }
                agent
            })
            .collect();
        PerturbationBlock { g }
    }

    pub fn population(&self) -> usize {
        self.g.len()
    }

    pub fn sensings(&self) -> usize {
        self.g.first().map_or(0, |a| a.len())
    }
}

/// `theta + eta / (k sigma) * sum_i w_i g_i`, summed in index order.
pub fn es_update(
    theta: &ParamVector,
    perturbations: &[Vec<f64>],
    weights: &[f64],
    eta: f64,
    sigma: f64,
) -> ParamVector {
    let k = perturbations.len();
    let mut acc = vec![0.0; theta.len()];
    for (g, &w) in perturbations.iter().zip(weights) {
        for (a, gj) in acc.iter_mut().zip(g) {
            *a += w * gj;
        }
    }
    let scale = eta / (k as f64 * sigma);
    let next = ParamVector(
        theta
            .0
            .iter()
            .zip(&acc)
            .map(|(t, a)| t + scale * a)
            .collect(),
    );
    debug_assert!({
        let step = next
            .0
            .iter()
            .zip(&theta.0)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let wmax = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        let gmax = perturbations
            .iter()
            .map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0f64, f64::max);
        step <= eta / sigma * wmax * gmax * (1.0 + 1e-9) + 1e-300
    });
    next
}

/// Blackbox objective to be maximized.
pub trait Blackbox: Sync {
    fn evaluate(&self, params: &[f64]) -> Result<f64>;
}

impl<F> Blackbox for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, params: &[f64]) -> Result<f64> {
        Ok(self(params))
    }
}

/// Episode return of a policy in an environment under a frozen filter.
pub struct RolloutObjective<'a> {
    pub env: &'a Env,
    pub arch: &'a PolicyArch,
    pub filter: &'a StateFilter,
}

impl Blackbox for RolloutObjective<'_> {
    fn evaluate(&self, params: &[f64]) -> Result<f64> {
        Ok(rollout_frozen(self.env, self.arch, params, self.filter)?.total_reward)
    }
}

/// One vanilla ES step with the given perturbations.
pub fn vanilla_step_with(
    theta: &ParamVector,
    perturbations: &[Vec<f64>],
    sigma: f64,
    eta: f64,
    objective: &dyn Blackbox,
) -> Result<ParamVector> {
    let rewards = perturbations
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let p = theta.perturb(sigma, g)?;
            objective
                .evaluate(p.as_slice())
                .map_err(|e| DvdError::Sensing {
                    index: i,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(es_update(
        theta,
        perturbations,
        &normalize_scores(&rewards),
        eta,
        sigma,
    ))
}

/// One vanilla ES step drawing `cfg.k` fresh perturbations from `rng`.
pub fn vanilla_step<R: Rng + ?Sized>(
    theta: &ParamVector,
    cfg: &EsConfig,
    objective: &dyn Blackbox,
    rng: &mut R,
) -> Result<ParamVector> {
    let block = PerturbationBlock::draw_from(rng, 1, cfg.k, theta.len(), cfg.antithetic);
    vanilla_step_with(theta, &block.g[0], cfg.sigma, cfg.eta, objective)
}

/// What the evaluation of one perturbed policy produced.
#[derive(Debug, Clone)]
pub struct Sensing {
    pub reward: f64,
    pub embedding: Vec<f64>,
    pub trajectory: Trajectory,
}

/// Fixed context shared by every rollout in an iteration.
pub struct EvalContext<'a> {
    pub env: &'a Env,
    pub arch: &'a PolicyArch,
    pub filter: &'a StateFilter,
    pub anchors: &'a [Vec<f64>],
    pub source: EmbeddingSource,
}

impl EvalContext<'_> {
    pub fn sense(&self, params: &[f64]) -> Result<Sensing> {
        let trajectory = rollout_frozen(self.env, self.arch, params, self.filter)?;
        let embedding = self.embedding_of(params, &trajectory);
        Ok(Sensing {
            reward: trajectory.total_reward,
            embedding,
            trajectory,
        })
    }

    fn embedding_of(&self, params: &[f64], trajectory: &Trajectory) -> Vec<f64> {
        match self.source {
            EmbeddingSource::Anchors => embed_unchecked(self.arch, params, self.anchors),
            EmbeddingSource::Trajectory => {
                trajectory_embedding(trajectory, self.env.horizon(), self.arch.act_dim()).0
            }
        }
    }

    /// Embedding of an unperturbed policy.
    pub fn embed(&self, params: &[f64]) -> Result<Vec<f64>> {
        match self.source {
            EmbeddingSource::Anchors => Ok(embed_unchecked(self.arch, params, self.anchors)),
            EmbeddingSource::Trajectory => {
                let t = rollout_frozen(self.env, self.arch, params, self.filter)?;
                Ok(self.embedding_of(params, &t))
            }
        }
    }
}

/// Evaluates `theta^m + sigma g[m][i]` for every listed agent and every `i`,
/// returning a dense `[agent][i]` table.
pub fn evaluate_block(
    ctx: &EvalContext<'_>,
    population: &[ParamVector],
    agents: &[usize],
    block: &PerturbationBlock,
    sigma: f64,
) -> Result<Vec<Vec<Sensing>>> {
    let k = block.sensings();
    let tasks: Vec<(usize, usize)> = agents
        .iter()
        .flat_map(|&m| (0..k).map(move |i| (m, i)))
        .collect();
    let flat = tasks
        .par_iter()
        .map(|&(m, i)| {
            let p = population[m].perturb(sigma, &block.g[m][i])?;
            ctx.sense(p.as_slice()).map_err(|e| DvdError::Sensing {
                index: m * k + i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<Sensing>>>()?;
    let mut table = Vec::with_capacity(agents.len());
    let mut it = flat.into_iter();
    for _ in agents {
        table.push(it.by_ref().take(k).collect());
    }
    Ok(table)
}

/// Determinant diversity of each column `{theta^m + sigma g[m][i]}_m`.
/// A column whose kernel matrix cannot be formed scores 0.
pub fn column_diversity(table: &[Vec<Sensing>], kernel: &KernelSpec) -> Vec<f64> {
    let k = table.first().map_or(0, |r| r.len());
    (0..k)
        .map(|i| {
            let column: Vec<Vec<f64>> = table.iter().map(|row| row[i].embedding.clone()).collect();
            gram(kernel, &column).map(|g| g.det()).unwrap_or(0.0)
        })
        .collect()
}

/// Joint DvD-ES update of every agent from an evaluated table:
/// `w_i^m = (1 - lambda) * zscore(R^m)_i + lambda * zscore(Div)_i`.
pub fn dvd_update(
    population: &[ParamVector],
    block: &PerturbationBlock,
    table: &[Vec<Sensing>],
    kernel: &KernelSpec,
    lambda: f64,
    sigma: f64,
    eta: f64,
) -> Vec<ParamVector> {
    let div_hat = normalize_scores(&column_diversity(table, kernel));
    population
        .iter()
        .enumerate()
        .map(|(m, theta)| {
            let rewards: Vec<f64> = table[m].iter().map(|s| s.reward).collect();
            let weights: Vec<f64> = normalize_scores(&rewards)
                .into_iter()
                .zip(&div_hat)
                .map(|(r, d)| (1.0 - lambda) * r + lambda * d)
                .collect();
            es_update(theta, &block.g[m], &weights, eta, sigma)
        })
        .collect()
}

/// Result of one population step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub population: Vec<ParamVector>,
    /// Agents that were evaluated, in table order.
    pub agents: Vec<usize>,
    pub table: Vec<Vec<Sensing>>,
}

/// Draws a block, evaluates all `M * k` perturbed policies and applies the
/// joint DvD-ES update with trade-off `lambda`.
pub fn dvd_step(
    ctx: &EvalContext<'_>,
    population: &[ParamVector],
    block: &PerturbationBlock,
    cfg: &EsConfig,
    lambda: f64,
) -> Result<StepOutcome> {
    let agents: Vec<usize> = (0..population.len()).collect();
    let table = evaluate_block(ctx, population, &agents, block, cfg.sigma)?;
    let next = dvd_update(
        population,
        block,
        &table,
        &cfg.kernel,
        lambda,
        cfg.sigma,
        cfg.eta,
    );
    Ok(StepOutcome {
        population: next,
        agents,
        table,
    })
}

/// NSR-ES update of agent `m`: its sensings' novelty is measured against the
/// other agents' current embeddings.
pub fn nsr_update(
    population: &[ParamVector],
    m: usize,
    perturbations: &[Vec<f64>],
    sensings: &[Sensing],
    others: &[Vec<f64>],
    lambda: f64,
    sigma: f64,
    eta: f64,
) -> Vec<ParamVector> {
    let rewards: Vec<f64> = sensings.iter().map(|s| s.reward).collect();
    let novelty: Vec<f64> = sensings
        .iter()
        .map(|s| novelty_against(&s.embedding, others, population.len()))
        .collect();
    let weights: Vec<f64> = normalize_scores(&rewards)
        .into_iter()
        .zip(normalize_scores(&novelty))
        .map(|(r, n)| (1.0 - lambda) * r + lambda * n)
        .collect();
    let mut next = population.to_vec();
    next[m] = es_update(&population[m], perturbations, &weights, eta, sigma);
    next
}

/// One NSR-ES iteration on a uniformly sampled agent.
pub fn nsr_step<R: Rng + ?Sized>(
    ctx: &EvalContext<'_>,
    population: &[ParamVector],
    block: &PerturbationBlock,
    cfg: &EsConfig,
    lambda: f64,
    rng: &mut R,
) -> Result<StepOutcome> {
    if population.len() < 2 {
        return Err(DvdError::InvalidArgument(
            "NSR-ES needs at least two agents".into(),
        ));
    }
    let m = rng.gen_range(0..population.len());
    let table = evaluate_block(ctx, population, &[m], block, cfg.sigma)?;
    let others: Vec<Vec<f64>> = (0..population.len())
        .filter(|&j| j != m)
        .map(|j| ctx.embed(population[j].as_slice()))
        .collect::<Result<_>>()?;
    let next = nsr_update(
        population,
        m,
        &block.g[m],
        &table[0],
        &others,
        lambda,
        cfg.sigma,
        cfg.eta,
    );
    Ok(StepOutcome {
        population: next,
        agents: vec![m],
        table,
    })
}

/// One row of the per-iteration log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    #[serde(rename = "iter")]
    pub iteration: usize,
    /// Mean sensing reward of each agent (last known value for agents not
    /// evaluated this iteration).
    #[serde(rename = "rewards")]
    pub per_agent_mean_reward: Vec<f64>,
    /// Best reward over every sensing evaluated this iteration.
    #[serde(rename = "best")]
    pub best_reward: f64,
    #[serde(rename = "lambda")]
    pub lambda_used: f64,
    /// `det(K)` of the post-update population.
    #[serde(rename = "div")]
    pub diversity: f64,
    /// Bandit reward credited to the previous iteration's arm.
    #[serde(rename = "signal")]
    pub bandit_signal: Option<u8>,
    #[serde(rename = "wall_s")]
    pub wall_time: f64,
}

/// Stateful training loop for one seed.
pub struct Trainer {
    cfg: EsConfig,
    env: Env,
    arch: PolicyArch,
    population: Vec<ParamVector>,
    filter: StateFilter,
    buffer: StateBuffer,
    anchors: Vec<Vec<f64>>,
    bandit: BanditState,
    pending_arm: Option<usize>,
    prev_best: Option<f64>,
    mean_rewards: Vec<f64>,
    anchor_rng: ChaCha8Rng,
    nsr_rng: ChaCha8Rng,
    iteration: usize,
    pool: rayon::ThreadPool,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

impl Trainer {
    /// `threads = None` uses rayon's default worker count.
    pub fn new(cfg: EsConfig, env: Env, threads: Option<usize>) -> Result<Self> {
        cfg.validate()?;
        env.validate()?;
        let arch = env.default_arch(cfg.hidden);
        let mut init_rng = stream_rng(cfg.seed, STREAM_INIT);
        let population = match cfg.init {
            InitMode::Shared => vec![arch.init_params(&mut init_rng); cfg.m],
            InitMode::Independent => (0..cfg.m)
                .map(|_| arch.init_params(&mut init_rng))
                .collect(),
        };
        let capacity = cfg.buffer_capacity.unwrap_or(10 * env.horizon() * cfg.m);
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads {
            builder = builder.num_threads(t.max(1));
        }
        let pool = builder
            .build()
            .map_err(|e| DvdError::InvalidArgument(format!("thread pool: {e}")))?;
        let mut bandit_rng = stream_rng(cfg.seed, STREAM_BANDIT);
        Ok(Trainer {
            bandit: BanditState::new(&cfg.lambda_arms, bandit_rng.gen())?,
            filter: StateFilter::new(env.obs_dim()),
            buffer: StateBuffer::new(capacity, env.obs_dim())?,
            anchors: Vec::new(),
            pending_arm: None,
            prev_best: None,
            mean_rewards: Vec::new(),
            anchor_rng: stream_rng(cfg.seed, STREAM_ANCHORS),
            nsr_rng: stream_rng(cfg.seed, STREAM_NSR),
            iteration: 0,
            population,
            arch,
            env,
            cfg,
            pool,
        })
    }

    pub fn population(&self) -> &[ParamVector] {
        &self.population
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    pub fn filter(&self) -> &StateFilter {
        &self.filter
    }

    pub fn arch(&self) -> &PolicyArch {
        &self.arch
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn bandit(&self) -> &BanditState {
        &self.bandit
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn ctx(&self) -> EvalContext<'_> {
        EvalContext {
            env: &self.env,
            arch: &self.arch,
            filter: &self.filter,
            anchors: &self.anchors,
            source: self.cfg.embedding.source,
        }
    }

    /// Embeddings of the current (unperturbed) agents.
    pub fn embeddings(&self) -> Result<Vec<Vec<f64>>> {
        let ctx = self.ctx();
        self.population
            .iter()
            .map(|p| ctx.embed(p.as_slice()))
            .collect()
    }

    /// Trajectories of the current agents under the current filter.
    pub fn agent_trajectories(&self) -> Result<Vec<Trajectory>> {
        self.population
            .iter()
            .map(|p| rollout_frozen(&self.env, &self.arch, p.as_slice(), &self.filter))
            .collect()
    }

    fn refresh_anchors(&mut self) -> Result<()> {
        if self.cfg.embedding.source != EmbeddingSource::Anchors {
            return Ok(());
        }
        if self.buffer.is_empty() {
            for t in self.agent_trajectories()? {
                self.buffer.record_states(&t)?;
            }
        }
        self.anchors = select_anchors(
            &self.buffer,
            &self.cfg.embedding,
            &self.cfg.kernel,
            &mut self.anchor_rng,
        )?;
        Ok(())
    }

    /// Records the iteration's visited states: sensing-major, agent-minor, so
    /// the FIFO tail keeps the most recent sensings of every agent.
    fn absorb_states(&mut self, table: &[Vec<Sensing>]) -> Result<()> {
        let k = table.first().map_or(0, |r| r.len());
        let total: usize = table.iter().flatten().map(|s| s.trajectory.len()).sum();
        let mut skip = total.saturating_sub(self.buffer.capacity());
        for i in 0..k {
            for row in table {
                let obs = &row[i].trajectory.observations;
                if skip >= obs.len() {
                    skip -= obs.len();
                    continue;
                }
                for o in &obs[skip..] {
                    self.buffer.push(o)?;
                }
                skip = 0;
            }
        }
        if self.env.uses_filter() {
            for row in table {
                for s in row {
                    for raw in &s.trajectory.raw_observations {
                        self.filter.push(raw);
                    }
                }
            }
        }
        Ok(())
    }

    /// Runs one iteration and returns its log row.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let t = self.iteration;
        self.step_inner().map_err(|e| DvdError::Iteration {
            iteration: t,
            source: Box::new(e),
        })
    }

    fn step_inner(&mut self) -> Result<IterationRecord> {
        let started = Instant::now();
        let t = self.iteration;
        if refresh_due(t, &self.cfg.embedding) {
            self.refresh_anchors()?;
        }
        if self.mean_rewards.is_empty() {
            self.mean_rewards = self
                .agent_trajectories()?
                .iter()
                .map(|tr| tr.total_reward)
                .collect();
        }
        let cfg = &self.cfg;
        let block = PerturbationBlock::draw(
            cfg.seed,
            t,
            cfg.m,
            cfg.k,
            self.arch.param_count(),
            cfg.antithetic,
        );

        // Evaluate.
        let agents: Vec<usize> = match cfg.algo {
            Algo::NsrEs => vec![self.nsr_rng.gen_range(0..cfg.m)],
            _ => (0..cfg.m).collect(),
        };
        let table = {
            let ctx = self.ctx();
            let population = &self.population;
            self.pool
                .install(|| evaluate_block(&ctx, population, &agents, &block, cfg.sigma))?
        };
        let best = table
            .iter()
            .flatten()
            .map(|s| s.reward)
            .fold(f64::NEG_INFINITY, f64::max);
        for (row, &m) in table.iter().zip(&agents) {
            self.mean_rewards[m] = row.iter().map(|s| s.reward).sum::<f64>() / row.len() as f64;
        }

        // Credit the previous arm, then pick this iteration's trade-off.
        let mut signal = None;
        if let (Some(arm), Some(prev)) = (self.pending_arm.take(), self.prev_best) {
            let s = reward_signal(prev, best)?;
            self.bandit.update(arm, s)?;
            signal = Some(s as u8);
        }
        let lambda = match (cfg.fixed_lambda, cfg.algo) {
            (Some(l), _) => l,
            (None, Algo::Vanilla) => 0.0,
            (None, Algo::NsrEs) => 0.5,
            (None, Algo::DvdEs) => {
                let (arm, l) = self.bandit.sample_lambda();
                self.pending_arm = Some(arm);
                l
            }
        };
        self.prev_best = Some(best);

        // Update.
        let next = match cfg.algo {
            Algo::Vanilla | Algo::DvdEs => dvd_update(
                &self.population,
                &block,
                &table,
                &cfg.kernel,
                lambda,
                cfg.sigma,
                cfg.eta,
            ),
            Algo::NsrEs => {
                let m = agents[0];
                let ctx = self.ctx();
                let others: Vec<Vec<f64>> = (0..cfg.m)
                    .filter(|&j| j != m)
                    .map(|j| ctx.embed(self.population[j].as_slice()))
                    .collect::<Result<_>>()?;
                nsr_update(
                    &self.population,
                    m,
                    &block.g[m],
                    &table[0],
                    &others,
                    lambda,
                    cfg.sigma,
                    cfg.eta,
                )
            }
        };
        self.population = next;
        self.absorb_states(&table)?;

        let embeddings = self.embeddings()?;
        let diversity = gram(&self.cfg.kernel, &embeddings)?.det();
        self.iteration += 1;
        Ok(IterationRecord {
            iteration: t,
            per_agent_mean_reward: self.mean_rewards.clone(),
            best_reward: best,
            lambda_used: lambda,
            diversity,
            bandit_signal: signal,
            wall_time: if self.cfg.record_wall_time {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        })
    }
}

/// Runs `cfg.iterations` iterations and returns every log row.
pub fn run(cfg: &EsConfig, env: &Env, threads: Option<usize>) -> Result<Vec<IterationRecord>> {
    let mut trainer = Trainer::new(cfg.clone(), env.clone(), threads)?;
    (0..cfg.iterations).map(|_| trainer.step()).collect()
}
