//! Additive-Gaussian forward process `x_{t+1} = x_t + eps_t` and its ancestral reverse step.
//!
//! The forward process is a random walk, so the marginal at step `t` is
//! `x0 + sqrt(t * s) * eps` with `s` the per-step variance. Given a point
//! estimate of `x0`, the reverse conditional `z_{t-1} | z_t, x0` is a Brownian
//! bridge with mean `x0 + (t-1)/t * (z_t - x0)` and variance `(t-1)/t * s`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{all_finite, Real};

pub const DEFAULT_STEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule<T> {
    steps: usize,
    per_step_variance: T,
}

impl<T: Real> NoiseSchedule<T> {
    pub fn new(steps: usize, per_step_variance: T) -> Result<Self> {
        if steps == 0 {
            return Err(Error::validation("schedule needs at least one step"));
        }
        if !(per_step_variance > T::zero()) || !per_step_variance.is_finite() {
            return Err(Error::validation("per_step_variance must be positive and finite"));
        }
        Ok(Self {
            steps,
            per_step_variance,
        })
    }

    /// Unit per-step variance.
    pub fn with_steps(steps: usize) -> Result<Self> {
        Self::new(steps, T::one())
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn per_step_variance(&self) -> T {
        self.per_step_variance
    }

    /// Variance accumulated after `t` forward steps: `t * s`.
    pub fn cumulative_variance(&self, t: usize) -> T {
        T::lit(t as f64) * self.per_step_variance
    }

    /// Variance of the noise injected by one reverse step from `t` to `t - 1`.
    pub fn reverse_noise_variance(&self, t: usize) -> T {
        if t == 0 {
            return T::zero();
        }
        let tf = T::lit(t as f64);
        (tf - T::one()) / tf * self.per_step_variance
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t > self.steps {
            Err(Error::StepOutOfRange { t, max: self.steps })
        } else {
            Ok(())
        }
    }
}

impl<T: Real> Default for NoiseSchedule<T> {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            per_step_variance: T::one(),
        }
    }
}

/// Latent `z_t` together with its step index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState<T> {
    pub z: Vec<T>,
    pub t: usize,
}

impl<T: Real> LatentState<T> {
    pub fn new(z: Vec<T>, t: usize) -> Self {
        Self { z, t }
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }
}

/// Draws `z_t = x0 + sqrt(t * s) * eps`.
pub fn forward_diffuse<T: Real, R: Rng + ?Sized>(
    x0: &[T],
    t: usize,
    schedule: &NoiseSchedule<T>,
    rng: &mut R,
) -> Result<LatentState<T>> {
    forward_diffuse_recorded(x0, t, schedule, rng).map(|(state, _)| state)
}

/// As [`forward_diffuse`], also returning the standard-normal draw used.
pub fn forward_diffuse_recorded<T: Real, R: Rng + ?Sized>(
    x0: &[T],
    t: usize,
    schedule: &NoiseSchedule<T>,
    rng: &mut R,
) -> Result<(LatentState<T>, Vec<T>)> {
    schedule.check_step(t)?;
    if !all_finite(x0) {
        return Err(Error::validation("x0 has non-finite entries"));
    }
    let scale = schedule.cumulative_variance(t).sqrt();
    let eps: Vec<T> = (0..x0.len()).map(|_| T::standard_normal(rng)).collect();
    let z = x0.iter().zip(&eps).map(|(&x, &e)| x + scale * e).collect();
    Ok((LatentState::new(z, t), eps))
}

/// Inverts the forward definition: `x0_hat = z_t - sqrt(t * s) * eps_hat`.
pub fn x0_from_eps<T: Real>(
    state: &LatentState<T>,
    eps_hat: &[T],
    schedule: &NoiseSchedule<T>,
) -> Result<Vec<T>> {
    if state.t == 0 {
        return Err(Error::InvalidStep);
    }
    check_dim(state, eps_hat)?;
    let scale = schedule.cumulative_variance(state.t).sqrt();
    Ok(state
        .z
        .iter()
        .zip(eps_hat)
        .map(|(&z, &e)| z - scale * e)
        .collect())
}

/// One ancestral step `t -> t - 1` conditioning on the point estimate implied by `eps_hat`.
pub fn reverse_step<T: Real, R: Rng + ?Sized>(
    state: &LatentState<T>,
    eps_hat: &[T],
    schedule: &NoiseSchedule<T>,
    rng: &mut R,
) -> Result<LatentState<T>> {
    reverse_step_with(state, eps_hat, schedule, || T::standard_normal(rng))
}

/// Reverse step with a caller-supplied source of standard-normal draws.
pub(crate) fn reverse_step_with<T: Real>(
    state: &LatentState<T>,
    eps_hat: &[T],
    schedule: &NoiseSchedule<T>,
    mut normal: impl FnMut() -> T,
) -> Result<LatentState<T>> {
    if state.t == 0 {
        return Err(Error::InvalidStep);
    }
    schedule.check_step(state.t)?;
    let x0_hat = x0_from_eps(state, eps_hat, schedule)?;
    let t = state.t;
    if t == 1 {
        return Ok(LatentState::new(x0_hat, 0));
    }
    let tf = T::lit(t as f64);
    let keep = (tf - T::one()) / tf;
    let noise_sd = schedule.reverse_noise_variance(t).sqrt();
    let z = x0_hat
        .iter()
        .zip(&state.z)
        .map(|(&x, &z)| x + keep * (z - x) + noise_sd * normal())
        .collect();
    Ok(LatentState::new(z, t - 1))
}

fn check_dim<T>(state: &LatentState<T>, v: &[T]) -> Result<()> {
    if state.z.len() != v.len() {
        return Err(Error::validation(format!(
            "dimension mismatch: latent has {} entries, vector has {}",
            state.z.len(),
            v.len()
        )));
    }
    Ok(())
}
