//! Deterministic policies over flat parameter vectors.
//!
//! Two architectures share the same flat representation so that ES
//! perturbation arithmetic is architecture-agnostic: a two-hidden-layer tanh
//! MLP for the point environments and a direct tabular argmax policy for the
//! tabular MDP.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, DvdError, Result};

/// Flattened policy parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Returns `self + sigma * g`.
    pub fn perturb(&self, sigma: f64, g: &[f64]) -> Result<ParamVector> {
        if g.len() != self.len() {
            return Err(DvdError::DimensionMismatch {
                expected: self.len(),
                got: g.len(),
            });
        }
        Ok(ParamVector(
            self.0.iter().zip(g).map(|(p, gi)| p + sigma * gi).collect(),
        ))
    }
}

/// Two-hidden-layer tanh network with tanh-squashed outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub hidden: (usize, usize),
}

impl MlpSpec {
    pub fn new(obs_dim: usize, act_dim: usize, hidden: (usize, usize)) -> Result<Self> {
        if obs_dim == 0 || act_dim == 0 || hidden.0 == 0 || hidden.1 == 0 {
            return Err(DvdError::InvalidArgument(
                "MLP dimensions must be positive".into(),
            ));
        }
        Ok(MlpSpec {
            obs_dim,
            act_dim,
            hidden,
        })
    }

    /// `(obs+1)*h1 + (h1+1)*h2 + (h2+1)*act`.
    pub fn param_count(&self) -> usize {
        let (h1, h2) = self.hidden;
        (self.obs_dim + 1) * h1 + (h1 + 1) * h2 + (h2 + 1) * self.act_dim
    }

    fn layers(&self) -> [(usize, usize); 3] {
        let (h1, h2) = self.hidden;
        [(self.obs_dim, h1), (h1, h2), (h2, self.act_dim)]
    }

    /// Gaussian weights with std `1/sqrt(fan_in)`, zero biases.
    ///
    /// Each layer is laid out as a row-major `out x in` weight block followed
    /// by `out` biases.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let mut values = Vec::with_capacity(self.param_count());
        for (fan_in, fan_out) in self.layers() {
            let normal = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).expect("valid std");
            for _ in 0..fan_in * fan_out {
                values.push(normal.sample(rng));
            }
            values.extend(std::iter::repeat(0.0).take(fan_out));
        }
        ParamVector(values)
    }

    pub fn forward(&self, params: &ParamVector, obs: &[f64]) -> Result<Vec<f64>> {
        if params.len() != self.param_count() {
            return Err(DvdError::DimensionMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        if obs.len() != self.obs_dim {
            return Err(DvdError::DimensionMismatch {
                expected: self.obs_dim,
                got: obs.len(),
            });
        }
        Ok(self.forward_unchecked(params.as_slice(), obs))
    }

    pub(crate) fn forward_unchecked(&self, params: &[f64], obs: &[f64]) -> Vec<f64> {
        let mut input = obs.to_vec();
        let mut offset = 0;
        for (fan_in, fan_out) in self.layers() {
            let weights = &params[offset..offset + fan_in * fan_out];
            let biases = &params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            input = (0..fan_out)
                .map(|o| {
                    let row = &weights[o * fan_in..(o + 1) * fan_in];
                    let z: f64 =
                        row.iter().zip(&input).map(|(w, x)| w * x).sum::<f64>() + biases[o];
                    z.tanh()
                })
                .collect();
        }
        input
    }
}

/// One logit per (decision state, action); acts by argmax with lowest-index
/// tie-break. Observations are one-hot state indicators and the emitted
/// action is the scalar action value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularSpec {
    pub n_states: usize,
    pub action_values: Vec<f64>,
}

impl TabularSpec {
    pub fn param_count(&self) -> usize {
        self.n_states * self.action_values.len()
    }

    pub fn action_index(&self, params: &[f64], state: usize) -> usize {
        let n = self.action_values.len();
        let logits = &params[state * n..(state + 1) * n];
        let mut best = 0;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = i;
            }
        }
        best
    }
}

/// Policy architecture shared by a whole population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PolicyArch {
    Mlp(MlpSpec),
    Tabular(TabularSpec),
}

impl PolicyArch {
    pub fn param_count(&self) -> usize {
        match self {
            PolicyArch::Mlp(m) => m.param_count(),
            PolicyArch::Tabular(t) => t.param_count(),
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self {
            PolicyArch::Mlp(m) => m.obs_dim,
            PolicyArch::Tabular(t) => t.n_states,
        }
    }

    pub fn act_dim(&self) -> usize {
        match self {
            PolicyArch::Mlp(m) => m.act_dim,
            PolicyArch::Tabular(_) => 1,
        }
    }

    /// Tabular policies start from all-zero logits, so every perturbation
    /// around the start is a fresh random argmax.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        match self {
            PolicyArch::Mlp(m) => m.init_params(rng),
            PolicyArch::Tabular(t) => ParamVector::zeros(t.param_count()),
        }
    }

    /// Deterministic action for one observation.
    pub fn act(&self, params: &ParamVector, obs: &[f64]) -> Result<Vec<f64>> {
        if params.len() != self.param_count() {
            return Err(DvdError::DimensionMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        if obs.len() != self.obs_dim() {
            return Err(DvdError::DimensionMismatch {
                expected: self.obs_dim(),
                got: obs.len(),
            });
        }
        check_finite(obs, "observation")?;
        Ok(self.act_unchecked(params.as_slice(), obs))
    }

    pub(crate) fn act_unchecked(&self, params: &[f64], obs: &[f64]) -> Vec<f64> {
        match self {
            PolicyArch::Mlp(m) => m.forward_unchecked(params, obs),
            PolicyArch::Tabular(t) => {
                let mut state = 0;
                for (i, &v) in obs.iter().enumerate() {
                    if v > obs[state] {
                        state = i;
                    }
                }
                vec![t.action_values[t.action_index(params, state)]]
            }
        }
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"DVDP";
const CHECKPOINT_VERSION: u32 = 1;

/// Writes a checkpoint: magic, version, `obs_dim`, `act_dim`, `h1`, `h2` (u32
/// LE), seed and parameter count (u64 LE), then the parameters as f64 LE.
pub fn write_checkpoint<W: Write>(
    mut w: W,
    spec: &MlpSpec,
    seed: u64,
    params: &ParamVector,
) -> Result<()> {
    if params.len() != spec.param_count() {
        return Err(DvdError::DimensionMismatch {
            expected: spec.param_count(),
            got: params.len(),
        });
    }
    w.write_all(CHECKPOINT_MAGIC)?;
    for v in [
        CHECKPOINT_VERSION,
        spec.obs_dim as u32,
        spec.act_dim as u32,
        spec.hidden.0 as u32,
        spec.hidden.1 as u32,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&seed.to_le_bytes())?;
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for v in params.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(MlpSpec, u64, ParamVector)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(DvdError::InvalidArgument("bad checkpoint magic".into()));
    }
    let mut u32s = [0u32; 5];
    for slot in &mut u32s {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        *slot = u32::from_le_bytes(b);
    }
    if u32s[0] != CHECKPOINT_VERSION {
        return Err(DvdError::InvalidArgument(format!(
            "unsupported checkpoint version {}",
            u32s[0]
        )));
    }
    let spec = MlpSpec::new(
        u32s[1] as usize,
        u32s[2] as usize,
        (u32s[3] as usize, u32s[4] as usize),
    )?;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let seed = u64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8) as usize;
    if count != spec.param_count() {
        return Err(DvdError::DimensionMismatch {
            expected: spec.param_count(),
            got: count,
        });
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    check_finite(&values, "checkpoint parameters")?;
    Ok((spec, seed, ParamVector(values)))
}
