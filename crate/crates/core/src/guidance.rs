//! Classifier-free guidance and the bias-avoiding combination with warm-up and momentum.
//!
//! ```text
//! eps = eps_u + s_g * (eps_c - eps_u - gamma)
//! gamma = s_b * (eps_b - eps_u) + s_m * v
//! v <- beta * v + (1 - beta) * gamma
//! ```
//!
//! `v` is the accumulator entering the current step; `gamma` is computed from it
//! and then folded into the accumulator for the next step. For the first
//! `warmup_steps` steps `gamma` is not applied.

use serde::{Deserialize, Serialize};

use crate::diffusion::DEFAULT_STEPS;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GuidanceConfig<T> {
    /// `s_g`
    pub guidance_scale: T,
    /// `s_b`. No published value; 7.0 is this crate's default.
    pub bias_scale: T,
    /// `s_m`
    pub momentum_scale: T,
    /// `beta`, in `[0, 1)`.
    pub momentum_decay: T,
    /// `delta`: number of initial steps without bias guidance.
    pub warmup_steps: usize,
    /// Total denoising steps `T`.
    pub steps: usize,
    /// Whether momentum keeps accumulating while bias guidance is held back.
    pub warmup_accumulates: bool,
}

impl<T: Real> Default for GuidanceConfig<T> {
    fn default() -> Self {
        Self {
            guidance_scale: T::lit(7.5),
            bias_scale: T::lit(7.0),
            momentum_scale: T::lit(0.5),
            momentum_decay: T::lit(0.7),
            warmup_steps: 7,
            steps: DEFAULT_STEPS,
            warmup_accumulates: true,
        }
    }
}

impl<T: Real> GuidanceConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |x: T, name: &str| {
            if x >= T::zero() && x.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(format!("{name} must be a finite non-negative number, got {x}")))
            }
        };
        nonneg(self.guidance_scale, "guidance_scale")?;
        nonneg(self.bias_scale, "bias_scale")?;
        nonneg(self.momentum_scale, "momentum_scale")?;
        if !(self.momentum_decay >= T::zero() && self.momentum_decay < T::one()) {
            return Err(Error::validation(format!(
                "momentum_decay must lie in [0, 1), got {}",
                self.momentum_decay
            )));
        }
        if self.steps == 0 {
            return Err(Error::validation("steps must be at least 1"));
        }
        if self.warmup_steps > self.steps {
            return Err(Error::validation(format!(
                "warmup_steps ({}) exceeds steps ({})",
                self.warmup_steps, self.steps
            )));
        }
        Ok(())
    }

    /// No bias guidance can ever reach the output.
    pub fn is_pure_cfg(&self) -> bool {
        (self.bias_scale == T::zero() && self.momentum_scale == T::zero())
            || self.warmup_steps >= self.steps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumState<T> {
    pub v: Vec<T>,
    pub steps_elapsed: usize,
}

impl<T: Real> MomentumState<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            v: vec![T::zero(); dim],
            steps_elapsed: 0,
        }
    }
}

pub fn cfg_combine<T: Real>(eps_u: &[T], eps_c: &[T], guidance_scale: T) -> Vec<T> {
    eps_u
        .iter()
        .zip(eps_c)
        .map(|(&u, &c)| u + guidance_scale * (c - u))
        .collect()
}

pub fn gamma_term<T: Real>(
    eps_u: &[T],
    eps_b: &[T],
    config: &GuidanceConfig<T>,
    state: &MomentumState<T>,
) -> Vec<T> {
    eps_u
        .iter()
        .zip(eps_b)
        .zip(&state.v)
        .map(|((&u, &b), &v)| config.bias_scale * (b - u) + config.momentum_scale * v)
        .collect()
}

pub fn momentum_update<T: Real>(state: &MomentumState<T>, gamma: &[T], decay: T) -> MomentumState<T> {
    let keep = T::one() - decay;
    MomentumState {
        v: state
            .v
            .iter()
            .zip(gamma)
            .map(|(&v, &g)| decay * v + keep * g)
            .collect(),
        steps_elapsed: state.steps_elapsed + 1,
    }
}

/// Combines the three noise estimates for the step `state.steps_elapsed` (0-based,
/// counted from `t = T`). Returns the guided estimate and the next momentum state.
pub fn decodi_combine<T: Real>(
    eps_u: &[T],
    eps_c: &[T],
    eps_b: &[T],
    config: &GuidanceConfig<T>,
    state: &MomentumState<T>,
) -> Result<(Vec<T>, MomentumState<T>)> {
    if state.steps_elapsed >= config.steps {
        return Err(Error::Protocol(format!(
            "momentum state has already seen {} of {} steps",
            state.steps_elapsed, config.steps
        )));
    }
    let dim = eps_u.len();
    if eps_c.len() != dim || eps_b.len() != dim || state.v.len() != dim {
        return Err(Error::validation("noise estimates and momentum differ in dimension"));
    }
    let gamma = gamma_term(eps_u, eps_b, config, state);
    if state.steps_elapsed < config.warmup_steps {
        let next = if config.warmup_accumulates {
            momentum_update(state, &gamma, config.momentum_decay)
        } else {
            MomentumState {
                v: state.v.clone(),
                steps_elapsed: state.steps_elapsed + 1,
            }
        };
        return Ok((cfg_combine(eps_u, eps_c, config.guidance_scale), next));
    }
    let out = eps_u
        .iter()
        .zip(eps_c)
        .zip(&gamma)
        .map(|((&u, &c), &g)| u + config.guidance_scale * (c - u - g))
        .collect();
    Ok((out, momentum_update(state, &gamma, config.momentum_decay)))
}
