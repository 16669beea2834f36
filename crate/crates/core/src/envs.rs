//! Deterministic desk-scale environments, rollouts and the running state filter.
//!
//! * `tabular`: a two-layer MDP with four decision states and five shared
//!   terminals, three of which pay +1.
//! * `point`: a point mass that must get around a wall to reach its goal.
//!   Walking straight at the goal gets it stuck at the wall (the deceptive
//!   plateau).
//! * `multimodal`: a point mass rewarded by the magnitude of its final
//!   x-displacement, so moving left and moving right are equally good.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diversity::mean_pairwise_distance;
use crate::error::{check_finite, DvdError, Result};
use crate::kernels::{gram, KernelSpec};
use crate::policy::{MlpSpec, ParamVector, PolicyArch, TabularSpec};

const WALL_MARGIN: f64 = 1e-6;
const FILTER_EPS: f64 = 1e-8;

/// Running mean/variance of observations (Welford).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFilter {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl StateFilter {
    pub fn new(dim: usize) -> Self {
        StateFilter {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population variance; 1 until at least two observations were seen.
    pub fn variance(&self) -> Vec<f64> {
        if self.count < 2 {
            vec![1.0; self.dim()]
        } else {
            self.m2
                .iter()
                .map(|m| (m / self.count as f64).max(0.0))
                .collect()
        }
    }

    pub fn push(&mut self, obs: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((mean, m2), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(obs) {
            let delta = x - *mean;
            *mean += delta / n;
            *m2 += delta * (x - *mean);
        }
    }

    /// `(obs - mean) / sqrt(var + 1e-8)`.
    pub fn apply(&self, obs: &[f64]) -> Vec<f64> {
        let var = self.variance();
        obs.iter()
            .zip(&self.mean)
            .zip(&var)
            .map(|((x, m), v)| (x - m) / (v + FILTER_EPS).sqrt())
            .collect()
    }
}

/// One episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Observations as the policy saw them (after filtering).
    pub observations: Vec<Vec<f64>>,
    /// Unfiltered observations, used to update the state filter.
    pub raw_observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub total_reward: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Tabular MDP

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TabularState {
    /// Decision state `s0..s3`.
    Decision(usize),
    /// Terminal `T1..T5`, zero-based.
    Terminal(usize),
}

/// Action values left, down, right.
pub const TABULAR_ACTIONS: [i32; 3] = [-1, 0, 1];

/// The four-state tabular MDP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TabularMdp;

impl TabularMdp {
    pub const N_DECISION: usize = 4;
    pub const N_TERMINAL: usize = 5;
    pub const HORIZON: usize = 2;
    pub const GAP: f64 = 1.0;

    /// `s0` branches to `s1..s3`; `s_j` maps left/down/right onto terminals
    /// `T_{j}, T_{j+1}, T_{j+2}` (one-based), so neighbouring states share
    /// terminals.
    pub fn transition(state: usize, action: i32) -> Result<TabularState> {
        if !(-1..=1).contains(&action) {
            return Err(DvdError::InvalidArgument(format!(
                "tabular action {action}"
            )));
        }
        let a = (action + 1) as usize;
        match state {
            0 => Ok(TabularState::Decision(1 + a)),
            1..=3 => Ok(TabularState::Terminal(state - 1 + a)),
            _ => Err(DvdError::IndexOutOfRange {
                index: state,
                len: 4,
            }),
        }
    }

    pub fn terminal_reward(terminal: usize) -> f64 {
        if terminal % 2 == 0 {
            1.0
        } else {
            0.0
        }
    }

    /// Reward of the trajectory taking `first` at `s0` then `second`.
    pub fn pair_reward(first: i32, second: i32) -> Result<f64> {
        match Self::transition(0, first)? {
            TabularState::Decision(s) => match Self::transition(s, second)? {
                TabularState::Terminal(t) => Ok(Self::terminal_reward(t)),
                TabularState::Decision(_) => unreachable!("second layer is terminal"),
            },
            TabularState::Terminal(_) => unreachable!("s0 is not terminal-adjacent"),
        }
    }

    pub fn policy_arch() -> PolicyArch {
        PolicyArch::Tabular(TabularSpec {
            n_states: Self::N_DECISION,
            action_values: TABULAR_ACTIONS.iter().map(|&a| a as f64).collect(),
        })
    }
}

// ---------------------------------------------------------------------------
// Point environments

/// Point mass separated from its goal by a wall segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointWallConfig {
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub wall: [[f64; 2]; 2],
    pub horizon: usize,
    pub max_step: f64,
}

impl Default for PointWallConfig {
    fn default() -> Self {
        PointWallConfig {
            start: [0.0, 0.0],
            goal: [0.0, 6.0],
            wall: [[-3.0, 3.0], [3.0, 3.0]],
            horizon: 50,
            max_step: 0.25,
        }
    }
}

impl PointWallConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || !(self.max_step > 0.0) {
            return Err(DvdError::Config(
                "point horizon and max_step must be positive".into(),
            ));
        }
        if segment_hit(self.start, self.goal, self.wall[0], self.wall[1]).is_none() {
            return Err(DvdError::Config(
                "wall must separate the straight start-goal segment".into(),
            ));
        }
        Ok(())
    }

    /// Moves from `pos` by the scaled action, stopping short of the wall.
    pub fn step(&self, pos: [f64; 2], action: &[f64]) -> ([f64; 2], f64) {
        let disp = scaled_displacement(action, self.max_step);
        let target = [pos[0] + disp[0], pos[1] + disp[1]];
        let new_pos = match segment_hit(pos, target, self.wall[0], self.wall[1]) {
            Some(t) => {
                let len = (disp[0] * disp[0] + disp[1] * disp[1]).sqrt();
                let t = (t - WALL_MARGIN / len).max(0.0);
                [pos[0] + t * disp[0], pos[1] + t * disp[1]]
            }
            None => target,
        };
        (new_pos, -dist(new_pos, self.goal))
    }

    /// Total reward of the straight-at-the-goal policy.
    pub fn plateau_reward(&self) -> f64 {
        let dir = [self.goal[0] - self.start[0], self.goal[1] - self.start[1]];
        let n = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
        let action = [dir[0] / n, dir[1] / n];
        self.scripted_reward(|_| action)
    }

    /// Total reward of a scripted trajectory that routes around the wall's
    /// nearer end: head for a waypoint just beyond it, then for the goal.
    pub fn go_around_reward(&self) -> f64 {
        let [w0, w1] = self.wall;
        let clearance = 2.0 * self.max_step;
        let end = if dist(w0, self.start) <= dist(w1, self.start) {
            (w0, w1)
        } else {
            (w1, w0)
        };
        let along = [end.0[0] - end.1[0], end.0[1] - end.1[1]];
        let al = (along[0] * along[0] + along[1] * along[1]).sqrt();
        let waypoint = [
            end.0[0] + clearance * along[0] / al,
            end.0[1] + clearance * along[1] / al,
        ];
        let goal = self.goal;
        let max_step = self.max_step;
        let mut reached = false;
        self.scripted_reward(move |pos| {
            if !reached && dist(pos, waypoint) < 1e-9 {
                reached = true;
            }
            let target = if reached { goal } else { waypoint };
            let d = [target[0] - pos[0], target[1] - pos[1]];
            let n = (d[0] * d[0] + d[1] * d[1]).sqrt();
            if n < 1e-12 {
                [0.0, 0.0]
            } else {
                let s = (n / max_step).min(1.0);
                [s * d[0] / n, s * d[1] / n]
            }
        })
    }

    fn scripted_reward<F: FnMut([f64; 2]) -> [f64; 2]>(&self, mut policy: F) -> f64 {
        let mut pos = self.start;
        let mut total = 0.0;
        for _ in 0..self.horizon {
            let a = policy(pos);
            let (p, r) = self.step(pos, &a);
            pos = p;
            total += r;
        }
        total
    }
}

/// Point mass rewarded by `|x_T - x_0|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiModalPointConfig {
    pub start: [f64; 2],
    pub horizon: usize,
    pub max_step: f64,
}

impl Default for MultiModalPointConfig {
    fn default() -> Self {
        MultiModalPointConfig {
            start: [0.0, 0.0],
            horizon: 50,
            max_step: 0.25,
        }
    }
}

impl MultiModalPointConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || !(self.max_step > 0.0) {
            return Err(DvdError::Config(
                "multimodal horizon and max_step must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Displacement of a policy that always moves at full speed along x.
    pub fn optimal_displacement(&self) -> f64 {
        self.horizon as f64 * self.max_step
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Action scaled by `max_step`, with its norm capped at `max_step`.
fn scaled_displacement(action: &[f64], max_step: f64) -> [f64; 2] {
    let n = (action[0] * action[0] + action[1] * action[1]).sqrt();
    let s = max_step / n.max(1.0);
    [action[0] * s, action[1] * s]
}

/// Fraction `t` in `[0, 1]` along `p -> q` where it meets segment `a -> b`.
fn segment_hit(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> Option<f64> {
    let r = [q[0] - p[0], q[1] - p[1]];
    let s = [b[0] - a[0], b[1] - a[1]];
    let denom = r[0] * s[1] - r[1] * s[0];
    if denom.abs() < 1e-15 {
        return None;
    }
    let ap = [a[0] - p[0], a[1] - p[1]];
    let t = (ap[0] * s[1] - ap[1] * s[0]) / denom;
    let u = (ap[0] * r[1] - ap[1] * r[0]) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Environment dispatch

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvName {
    Tabular,
    Point,
    MultiModal,
}

impl EnvName {
    pub const ALL: [EnvName; 3] = [EnvName::Tabular, EnvName::Point, EnvName::MultiModal];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvName::Tabular => "tabular",
            EnvName::Point => "point",
            EnvName::MultiModal => "multimodal",
        }
    }
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvName {
    type Err = DvdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tabular" => Ok(EnvName::Tabular),
            "point" => Ok(EnvName::Point),
            "multimodal" => Ok(EnvName::MultiModal),
            other => Err(DvdError::Config(format!(
                "unknown env '{other}', valid names: tabular, point, multimodal"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Env {
    Tabular(TabularMdp),
    Point(PointWallConfig),
    MultiModal(MultiModalPointConfig),
}

/// Hidden width of the MLP policies used by the point environments.
pub const DEFAULT_HIDDEN: usize = 16;

impl Env {
    pub fn by_name(name: EnvName) -> Env {
        match name {
            EnvName::Tabular => Env::Tabular(TabularMdp),
            EnvName::Point => Env::Point(PointWallConfig::default()),
            EnvName::MultiModal => Env::MultiModal(MultiModalPointConfig::default()),
        }
    }

    pub fn name(&self) -> EnvName {
        match self {
            Env::Tabular(_) => EnvName::Tabular,
            Env::Point(_) => EnvName::Point,
            Env::MultiModal(_) => EnvName::MultiModal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Env::Tabular(_) => Ok(()),
            Env::Point(c) => c.validate(),
            Env::MultiModal(c) => c.validate(),
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self {
            Env::Tabular(_) => TabularMdp::N_DECISION,
            _ => 2,
        }
    }

    pub fn act_dim(&self) -> usize {
        match self {
            Env::Tabular(_) => 1,
            _ => 2,
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            Env::Tabular(_) => TabularMdp::HORIZON,
            Env::Point(c) => c.horizon,
            Env::MultiModal(c) => c.horizon,
        }
    }

    /// Whether observations pass through the running state filter.
    pub fn uses_filter(&self) -> bool {
        !matches!(self, Env::Tabular(_))
    }

    pub fn default_arch(&self, hidden: usize) -> PolicyArch {
        match self {
            Env::Tabular(_) => TabularMdp::policy_arch(),
            _ => PolicyArch::Mlp(MlpSpec {
                obs_dim: self.obs_dim(),
                act_dim: self.act_dim(),
                hidden: (hidden, hidden),
            }),
        }
    }

    pub fn reset(&self) -> Episode<'_> {
        let pos = match self {
            Env::Tabular(_) => [0.0, 0.0],
            Env::Point(c) => c.start,
            Env::MultiModal(c) => c.start,
        };
        Episode {
            env: self,
            pos,
            tabular: TabularState::Decision(0),
            t: 0,
        }
    }
}

/// Live episode state.
#[derive(Debug, Clone)]
pub struct Episode<'a> {
    env: &'a Env,
    pos: [f64; 2],
    tabular: TabularState,
    t: usize,
}

impl Episode<'_> {
    pub fn position(&self) -> [f64; 2] {
        self.pos
    }

    pub fn tabular_state(&self) -> TabularState {
        self.tabular
    }

    pub fn done(&self) -> bool {
        self.t >= self.env.horizon() || matches!(self.tabular, TabularState::Terminal(_))
    }

    pub fn observation(&self) -> Vec<f64> {
        match self.env {
            Env::Tabular(_) => {
                let mut one_hot = vec![0.0; TabularMdp::N_DECISION];
                if let TabularState::Decision(s) = self.tabular {
                    one_hot[s] = 1.0;
                }
                one_hot
            }
            _ => self.pos.to_vec(),
        }
    }

    /// Applies an action and returns the step reward.
    pub fn step(&mut self, action: &[f64]) -> Result<f64> {
        if action.len() != self.env.act_dim() {
            return Err(DvdError::DimensionMismatch {
                expected: self.env.act_dim(),
                got: action.len(),
            });
        }
        if !action.iter().all(|a| a.is_finite()) {
            return Err(DvdError::Rollout {
                step: self.t,
                reason: "non-finite action".into(),
            });
        }
        let reward = match self.env {
            Env::Tabular(_) => {
                let TabularState::Decision(s) = self.tabular else {
                    return Err(DvdError::Rollout {
                        step: self.t,
                        reason: "step after terminal".into(),
                    });
                };
                let a = action[0].round().clamp(-1.0, 1.0) as i32;
                self.tabular = TabularMdp::transition(s, a)?;
                match self.tabular {
                    TabularState::Terminal(term) => TabularMdp::terminal_reward(term),
                    TabularState::Decision(_) => 0.0,
                }
            }
            Env::Point(c) => {
                let (p, r) = c.step(self.pos, action);
                self.pos = p;
                r
            }
            Env::MultiModal(c) => {
                let before = (self.pos[0] - c.start[0]).abs();
                let disp = scaled_displacement(action, c.max_step);
                self.pos = [self.pos[0] + disp[0], self.pos[1] + disp[1]];
                (self.pos[0] - c.start[0]).abs() - before
            }
        };
        self.t += 1;
        Ok(reward)
    }
}

/// Runs one deterministic episode against a frozen filter snapshot.
///
/// The filter is applied when `env.uses_filter()`; it is never mutated here.
pub fn rollout_frozen(
    env: &Env,
    arch: &PolicyArch,
    params: &[f64],
    filter: &StateFilter,
) -> Result<Trajectory> {
    let mut ep = env.reset();
    let mut traj = Trajectory {
        observations: Vec::with_capacity(env.horizon()),
        raw_observations: Vec::with_capacity(env.horizon()),
        actions: Vec::with_capacity(env.horizon()),
        total_reward: 0.0,
    };
    while !ep.done() {
        let raw = ep.observation();
        if !raw.iter().all(|v| v.is_finite()) {
            return Err(DvdError::Rollout {
                step: ep.t,
                reason: "non-finite observation".into(),
            });
        }
        let obs = if env.uses_filter() {
            filter.apply(&raw)
        } else {
            raw.clone()
        };
        let action = arch.act_unchecked(params, &obs);
        traj.total_reward += ep.step(&action)?;
        traj.observations.push(obs);
        traj.raw_observations.push(raw);
        traj.actions.push(action);
    }
    Ok(traj)
}

/// Runs one episode. The policy sees observations normalized by the filter
/// as it was at the start of the episode; with `train_mode` the visited raw
/// observations are folded into the filter afterwards.
pub fn rollout(
    env: &Env,
    arch: &PolicyArch,
    params: &ParamVector,
    filter: &mut StateFilter,
    train_mode: bool,
) -> Result<Trajectory> {
    if params.len() != arch.param_count() {
        return Err(DvdError::DimensionMismatch {
            expected: arch.param_count(),
            got: params.len(),
        });
    }
    if arch.obs_dim() != env.obs_dim() || arch.act_dim() != env.act_dim() {
        return Err(DvdError::DimensionMismatch {
            expected: env.obs_dim(),
            got: arch.obs_dim(),
        });
    }
    check_finite(params.as_slice(), "policy parameters")?;
    let traj = rollout_frozen(env, arch, params.as_slice(), filter)?;
    if train_mode && env.uses_filter() {
        for raw in &traj.raw_observations {
            filter.push(raw);
        }
    }
    Ok(traj)
}

// ---------------------------------------------------------------------------
// Tabular enumeration oracle

/// The optimal embedding set of the tabular MDP.
pub const PHI_STAR: [[f64; 2]; 5] = [
    [-1.0, -1.0],
    [-1.0, 1.0],
    [0.0, 0.0],
    [1.0, -1.0],
    [1.0, 1.0],
];
/// `PHI_STAR` with `[0, 0]` replaced by a second `[1, 1]`.
pub const PHI_PRIME: [[f64; 2]; 5] = [
    [-1.0, -1.0],
    [-1.0, 1.0],
    [1.0, -1.0],
    [1.0, 1.0],
    [1.0, 1.0],
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TabularOracleReport {
    pub kernel: String,
    /// All nine action-pair embeddings with their rewards.
    pub embeddings: Vec<([f64; 2], f64)>,
    pub positive_embeddings: Vec<[f64; 2]>,
    pub multisets_checked: usize,
    pub det_phi_star: f64,
    /// Largest determinant over every other 5-multiset of positive embeddings.
    pub max_det_other: f64,
    /// Every multiset containing a repeated embedding had determinant 0.
    pub repeats_have_zero_det: bool,
    /// `det > 0` holds for `PHI_STAR` and for no other multiset.
    pub phi_star_unique_positive_det: bool,
    pub d_phi_star: f64,
    pub d_phi_prime: f64,
}

impl TabularOracleReport {
    pub fn passed(&self) -> bool {
        self.positive_embeddings.len() == 5
            && self.repeats_have_zero_det
            && self.phi_star_unique_positive_det
            && self.d_phi_prime > self.d_phi_star
    }
}

fn multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Enumerates the tabular MDP's embeddings and checks that only the set of
/// five distinct optima has a positive kernel determinant, while a set with a
/// duplicate has larger mean pairwise distance.
pub fn enumerate_tabular(kernel: &KernelSpec) -> Result<TabularOracleReport> {
    let mut embeddings = Vec::new();
    for a in TABULAR_ACTIONS {
        for b in TABULAR_ACTIONS {
            embeddings.push(([a as f64, b as f64], TabularMdp::pair_reward(a, b)?));
        }
    }
    let positive: Vec<[f64; 2]> = embeddings
        .iter()
        .filter(|(_, r)| *r > 0.0)
        .map(|(e, _)| *e)
        .collect();

    let mut det_phi_star = 0.0;
    let mut max_det_other: f64 = 0.0;
    let mut repeats_zero = true;
    let sets = multisets(positive.len(), 5);
    for set in &sets {
        let pop: Vec<Vec<f64>> = set.iter().map(|&i| positive[i].to_vec()).collect();
        let det = gram(kernel, &pop)?.det();
        let distinct = set.windows(2).all(|w| w[0] != w[1]);
        if distinct && positive.len() == 5 {
            det_phi_star = det;
        } else {
            max_det_other = max_det_other.max(det);
            if det != 0.0 {
                repeats_zero = false;
            }
        }
    }
    let star: Vec<Vec<f64>> = PHI_STAR.iter().map(|e| e.to_vec()).collect();
    let prime: Vec<Vec<f64>> = PHI_PRIME.iter().map(|e| e.to_vec()).collect();
    let positive_matches_star =
        positive.len() == 5 && PHI_STAR.iter().all(|e| positive.contains(e));
    Ok(TabularOracleReport {
        kernel: kernel.kind.name().to_string(),
        embeddings,
        phi_star_unique_positive_det: positive_matches_star
            && det_phi_star > 0.0
            && max_det_other == 0.0,
        positive_embeddings: positive,
        multisets_checked: sets.len(),
        det_phi_star,
        max_det_other,
        repeats_have_zero_det: repeats_zero,
        d_phi_star: mean_pairwise_distance(&star)?,
        d_phi_prime: mean_pairwise_distance(&prime)?,
    })
}
