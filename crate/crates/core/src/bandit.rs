//! Thompson sampling over candidate values of the reward/diversity trade-off.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{DvdError, Result};

/// Default arm values for the trade-off weight.
pub const DEFAULT_LAMBDAS: [f64; 2] = [0.0, 0.5];

/// Beta posterior over one arm's success probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaArm {
    pub lambda_value: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl BetaArm {
    pub fn new(lambda_value: f64) -> Self {
        BetaArm {
            lambda_value,
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

#[derive(Debug, Clone)]
pub struct BanditState {
    arms: Vec<BetaArm>,
    last_chosen: Option<usize>,
    rng: ChaCha8Rng,
}

impl BanditState {
    pub fn new(lambdas: &[f64], seed: u64) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(DvdError::InvalidArgument(
                "bandit needs at least one arm".into(),
            ));
        }
        for (i, a) in lambdas.iter().enumerate() {
            if !(0.0..1.0).contains(a) {
                return Err(DvdError::InvalidArgument(format!(
                    "lambda {a} outside [0, 1)"
                )));
            }
            if lambdas[..i].contains(a) {
                return Err(DvdError::InvalidArgument(format!("duplicate lambda {a}")));
            }
        }
        Ok(BanditState {
            arms: lambdas.iter().map(|&l| BetaArm::new(l)).collect(),
            last_chosen: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Builds a state from explicit arms.
    pub fn with_arms(arms: Vec<BetaArm>, seed: u64) -> Result<Self> {
        let lambdas: Vec<f64> = arms.iter().map(|a| a.lambda_value).collect();
        let mut s = Self::new(&lambdas, seed)?;
        for a in &arms {
            if !(a.alpha > 0.0 && a.beta > 0.0) {
                return Err(DvdError::InvalidArgument(
                    "Beta parameters must be positive".into(),
                ));
            }
        }
        s.arms = arms;
        Ok(s)
    }

    pub fn arms(&self) -> &[BetaArm] {
        &self.arms
    }

    pub fn last_chosen(&self) -> Option<usize> {
        self.last_chosen
    }

    /// Draws one sample per arm and pulls the argmax (lowest index on ties).
    pub fn sample_lambda(&mut self) -> (usize, f64) {
        let mut best = 0;
        let mut best_mu = f64::NEG_INFINITY;
        for (i, arm) in self.arms.iter().enumerate() {
            let mu = Beta::new(arm.alpha, arm.beta)
                .expect("positive Beta parameters")
                .sample(&mut self.rng);
            if mu > best_mu {
                best_mu = mu;
                best = i;
            }
        }
        self.last_chosen = Some(best);
        (best, self.arms[best].lambda_value)
    }

    /// Conjugate update of the pulled arm; every other arm is untouched.
    pub fn update(&mut self, arm: usize, success: bool) -> Result<()> {
        if self.last_chosen != Some(arm) {
            return Err(DvdError::ArmMismatch {
                expected: self.last_chosen,
                got: arm,
            });
        }
        let a = &mut self.arms[arm];
        if success {
            a.alpha += 1.0;
        } else {
            a.beta += 1.0;
        }
        Ok(())
    }
}

/// `1(new > prev)`.
pub fn reward_signal(prev_reward: f64, new_reward: f64) -> Result<bool> {
    if !prev_reward.is_finite() || !new_reward.is_finite() {
        return Err(DvdError::NonFinite("bandit reward".into()));
    }
    Ok(new_reward > prev_reward)
}
