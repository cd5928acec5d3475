//! Labeled conditional Gaussian-mixture worlds with closed-form denoisers.
//!
//! Under the random-walk forward process a component `N(mu_k, var_k I)` has
//! the noisy marginal `N(mu_k, (var_k + t s) I)`, so the Bayes-optimal noise
//! prediction for any weighting of the components is available in closed form.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::{LatentState, NoiseSchedule};
use crate::error::{Error, Result};
use crate::scalar::{all_finite, squared_distance, Real};

/// Default distance between neighbouring component means, in component standard deviations.
pub const DEFAULT_SEPARATION: f64 = 16.0;

/// Floor applied to zero-probability mixture weights in the builtin worlds.
pub const WEIGHT_FLOOR: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub values: Vec<String>,
}

/// Ordered protected attributes and their allowed values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributeScheme {
    attributes: Vec<Attribute>,
}

impl AttributeScheme {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        let scheme = Self { attributes };
        scheme.validate()?;
        Ok(scheme)
    }

    fn validate(&self) -> Result<()> {
        if self.attributes.is_empty() {
            return Err(Error::validation("attribute scheme is empty"));
        }
        for (i, a) in self.attributes.iter().enumerate() {
            if self.attributes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::validation(format!("duplicate attribute `{}`", a.name)));
            }
            if a.values.is_empty() {
                return Err(Error::validation(format!("attribute `{}` has no values", a.name)));
            }
            for (j, v) in a.values.iter().enumerate() {
                if a.values[..j].contains(v) {
                    return Err(Error::validation(format!(
                        "attribute `{}` lists `{v}` twice",
                        a.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn values(&self, attribute: &str) -> Result<&[String]> {
        self.attributes
            .iter()
            .find(|a| a.name == attribute)
            .map(|a| a.values.as_slice())
            .ok_or_else(|| Error::Lookup {
                kind: "attribute",
                name: attribute.to_string(),
            })
    }

    pub fn is_legal(&self, attribute: &str, value: &str) -> bool {
        self.values(attribute)
            .map(|vs| vs.iter().any(|v| v == value))
            .unwrap_or(false)
    }
}

impl Default for AttributeScheme {
    /// gender, ethnicity and apparent age.
    fn default() -> Self {
        let attr = |name: &str, values: &[&str]| Attribute {
            name: name.to_string(),
            values: values.iter().map(|v| v.to_string()).collect(),
        };
        Self {
            attributes: vec![
                attr("gender", &["male", "female"]),
                attr("ethnicity", &["black", "white", "asian", "indian"]),
                attr("age", &["young", "middle-age", "elderly"]),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent<T> {
    pub mu: Vec<T>,
    pub var: T,
    pub labels: BTreeMap<String, String>,
}

/// Which weight vector a noise prediction conditions on.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Condition {
    Unconditional,
    Named(String),
}

impl Condition {
    pub fn named(id: impl Into<String>) -> Self {
        Condition::Named(id.into())
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Unconditional => f.write_str("<unconditional>"),
            Condition::Named(id) => f.write_str(id),
        }
    }
}

/// The attribute a world is skewed on, and the conditions that express the skew.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiasFocus {
    pub attribute: String,
    pub biased_value: String,
    pub prompt_condition: String,
    pub bias_condition: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptWorld<T> {
    name: String,
    scheme: AttributeScheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    focus: Option<BiasFocus>,
    unconditional_weights: Vec<T>,
    conditions: BTreeMap<String, Vec<T>>,
    components: Vec<GaussianComponent<T>>,
}

impl<T: Real> ConceptWorld<T> {
    pub fn new(
        name: impl Into<String>,
        scheme: AttributeScheme,
        components: Vec<GaussianComponent<T>>,
        conditions: BTreeMap<String, Vec<T>>,
        unconditional_weights: Vec<T>,
    ) -> Result<Self> {
        let world = Self {
            name: name.into(),
            scheme,
            focus: None,
            unconditional_weights,
            conditions,
            components,
        };
        world.validate()?;
        Ok(world)
    }

    pub fn with_focus(mut self, focus: BiasFocus) -> Result<Self> {
        self.focus = Some(focus);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        let k = self.components.len();
        if k == 0 {
            return Err(Error::validation(format!("world `{}` has no components", self.name)));
        }
        let dim = self.components[0].mu.len();
        if dim == 0 {
            return Err(Error::validation("component means must be non-empty"));
        }
        for (i, c) in self.components.iter().enumerate() {
            if c.mu.len() != dim {
                return Err(Error::validation(format!("component {i} has dimension {}, expected {dim}", c.mu.len())));
            }
            if !all_finite(&c.mu) {
                return Err(Error::validation(format!("component {i} has a non-finite mean")));
            }
            if !(c.var > T::zero()) || !c.var.is_finite() {
                return Err(Error::validation(format!("component {i} variance must be positive")));
            }
            if c.labels.len() != self.scheme.attributes().len() {
                return Err(Error::validation(format!(
                    "component {i} must label every attribute exactly once"
                )));
            }
            for attr in self.scheme.attributes() {
                match c.labels.get(&attr.name) {
                    Some(v) if attr.values.contains(v) => {}
                    Some(v) => {
                        return Err(Error::validation(format!(
                            "component {i}: `{v}` is not a legal {}",
                            attr.name
                        )))
                    }
                    None => {
                        return Err(Error::validation(format!(
                            "component {i} has no `{}` label",
                            attr.name
                        )))
                    }
                }
            }
            if self.components[..i].iter().any(|o| o.mu == c.mu) {
                return Err(Error::validation(format!("component {i} duplicates an earlier mean")));
            }
        }
        if self.conditions.is_empty() {
            return Err(Error::validation("world defines no conditions"));
        }
        check_simplex(&self.unconditional_weights, k, "unconditional")?;
        for (id, w) in &self.conditions {
            check_simplex(w, k, id)?;
        }
        if let Some(f) = &self.focus {
            if !self.scheme.is_legal(&f.attribute, &f.biased_value) {
                return Err(Error::validation(format!(
                    "focus value `{}` is not a legal {}",
                    f.biased_value, f.attribute
                )));
            }
            for id in [&f.prompt_condition, &f.bias_condition] {
                if !self.conditions.contains_key(id) {
                    return Err(Error::Lookup { kind: "condition", name: id.clone() });
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn scheme(&self) -> &AttributeScheme {
        &self.scheme
    }

    pub fn components(&self) -> &[GaussianComponent<T>] {
        &self.components
    }

    pub fn focus(&self) -> Option<&BiasFocus> {
        self.focus.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.components[0].mu.len()
    }

    pub fn unconditional_weights(&self) -> &[T] {
        &self.unconditional_weights
    }

    pub fn condition_ids(&self) -> impl Iterator<Item = &str> {
        self.conditions.keys().map(String::as_str)
    }

    pub fn conditions(&self) -> &BTreeMap<String, Vec<T>> {
        &self.conditions
    }

    pub fn weights(&self, condition: &Condition) -> Result<&[T]> {
        match condition {
            Condition::Unconditional => Ok(&self.unconditional_weights),
            Condition::Named(id) => self.condition_weights(id),
        }
    }

    pub fn condition_weights(&self, id: &str) -> Result<&[T]> {
        self.conditions
            .get(id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Lookup {
                kind: "condition",
                name: id.to_string(),
            })
    }

    /// Total weight on components whose `attribute` label equals `value`.
    pub fn label_mass(&self, weights: &[T], attribute: &str, value: &str) -> T {
        self.components
            .iter()
            .zip(weights)
            .filter(|(c, _)| c.labels.get(attribute).map(String::as_str) == Some(value))
            .fold(T::zero(), |acc, (_, &w)| acc + w)
    }

    fn check_weights(&self, weights: &[T]) -> Result<()> {
        if weights.len() != self.components.len() {
            return Err(Error::validation(format!(
                "weight vector has {} entries for {} components",
                weights.len(),
                self.components.len()
            )));
        }
        if weights.iter().any(|&w| !(w >= T::zero()) || !w.is_finite()) {
            return Err(Error::validation("weights must be non-negative and finite"));
        }
        if weights.iter().all(|&w| w == T::zero()) {
            return Err(Error::validation("all mixture weights are zero"));
        }
        Ok(())
    }

    fn check_point(&self, z: &[T]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::validation(format!(
                "point has dimension {}, world has {}",
                z.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn log_joint(&self, z: &[T], noise_var: T, weights: &[T]) -> Vec<T> {
        let half_d = T::lit(self.dim() as f64 / 2.0);
        let two_pi = T::lit(std::f64::consts::TAU);
        self.components
            .iter()
            .zip(weights)
            .map(|(c, &w)| {
                if w == T::zero() {
                    return T::neg_infinity();
                }
                let v = c.var + noise_var;
                w.ln() - half_d * (two_pi * v).ln() - squared_distance(z, &c.mu) / (v + v)
            })
            .collect()
    }

    /// Posterior over components given a point observed with extra noise
    /// variance `noise_var` (use `schedule.cumulative_variance(t)`).
    pub fn responsibilities(&self, z: &[T], noise_var: T, weights: &[T]) -> Result<Vec<T>> {
        self.check_weights(weights)?;
        self.check_point(z)?;
        let logs = self.log_joint(z, noise_var, weights);
        let max = logs.iter().copied().fold(T::neg_infinity(), T::max);
        let unnorm: Vec<T> = logs.into_iter().map(|l| (l - max).exp()).collect();
        let total = unnorm.iter().fold(T::zero(), |a, &x| a + x);
        Ok(unnorm.into_iter().map(|x| x / total).collect())
    }

    /// `E[x0 | z]` under the weighted mixture at noise variance `noise_var`.
    pub fn posterior_mean(&self, z: &[T], noise_var: T, weights: &[T]) -> Result<Vec<T>> {
        let r = self.responsibilities(z, noise_var, weights)?;
        if noise_var == T::zero() {
            return Ok(z.to_vec());
        }
        let mut out = vec![T::zero(); z.len()];
        for (c, &rk) in self.components.iter().zip(&r) {
            if rk == T::zero() {
                continue;
            }
            let denom = c.var + noise_var;
            for ((o, &m), &zi) in out.iter_mut().zip(&c.mu).zip(z) {
                *o += rk * (noise_var * m + c.var * zi) / denom;
            }
        }
        Ok(out)
    }

    /// Bayes-optimal noise prediction `(z_t - E[x0 | z_t]) / sqrt(t s)`; zero at `t = 0`.
    pub fn analytic_eps(
        &self,
        state: &LatentState<T>,
        condition: &Condition,
        schedule: &NoiseSchedule<T>,
    ) -> Result<Vec<T>> {
        let weights = self.weights(condition)?;
        self.analytic_eps_weighted(state, weights, schedule)
    }

    pub fn analytic_eps_weighted(
        &self,
        state: &LatentState<T>,
        weights: &[T],
        schedule: &NoiseSchedule<T>,
    ) -> Result<Vec<T>> {
        if state.t == 0 {
            self.check_weights(weights)?;
            return Ok(vec![T::zero(); state.dim()]);
        }
        let noise_var = schedule.cumulative_variance(state.t);
        let mean = self.posterior_mean(&state.z, noise_var, weights)?;
        let scale = noise_var.sqrt();
        Ok(state
            .z
            .iter()
            .zip(&mean)
            .map(|(&z, &m)| (z - m) / scale)
            .collect())
    }

    /// Exact draw from `p(z_{t-1} | z_t)` for the weighted mixture prior.
    pub fn exact_reverse_step<R: Rng + ?Sized>(
        &self,
        state: &LatentState<T>,
        weights: &[T],
        schedule: &NoiseSchedule<T>,
        rng: &mut R,
    ) -> Result<LatentState<T>> {
        if state.t == 0 {
            return Err(Error::InvalidStep);
        }
        if state.t > schedule.steps() {
            return Err(Error::StepOutOfRange { t: state.t, max: schedule.steps() });
        }
        let noise_now = schedule.cumulative_variance(state.t);
        let noise_prev = schedule.cumulative_variance(state.t - 1);
        let r = self.responsibilities(&state.z, noise_now, weights)?;
        let k = sample_index(&r, rng);
        let c = &self.components[k];
        let prev_var = c.var + noise_prev;
        let gain = prev_var / (c.var + noise_now);
        let sd = (prev_var * (T::one() - gain)).sqrt();
        let z = c
            .mu
            .iter()
            .zip(&state.z)
            .map(|(&m, &z)| m + gain * (z - m) + sd * T::standard_normal(rng))
            .collect();
        Ok(LatentState::new(z, state.t - 1))
    }

    /// Draws a component index from `weights`, then `x0 ~ N(mu_k, var_k I)`.
    pub fn sample_prior<R: Rng + ?Sized>(&self, weights: &[T], rng: &mut R) -> Result<Vec<T>> {
        self.sample_prior_labeled(weights, rng).map(|(_, x)| x)
    }

    pub fn sample_prior_labeled<R: Rng + ?Sized>(
        &self,
        weights: &[T],
        rng: &mut R,
    ) -> Result<(usize, Vec<T>)> {
        self.check_weights(weights)?;
        let k = sample_index(weights, rng);
        let c = &self.components[k];
        let sd = c.var.sqrt();
        let x = c.mu.iter().map(|&m| m + sd * T::standard_normal(rng)).collect();
        Ok((k, x))
    }

    /// Runs the exact reverse chain from a draw of the true time-`T` marginal down to `t = 0`.
    pub fn exact_chain<R: Rng + ?Sized>(
        &self,
        weights: &[T],
        schedule: &NoiseSchedule<T>,
        rng: &mut R,
    ) -> Result<Vec<T>> {
        let x0 = self.sample_prior(weights, rng)?;
        let mut state = crate::diffusion::forward_diffuse(&x0, schedule.steps(), schedule, rng)?;
        while state.t > 0 {
            state = self.exact_reverse_step(&state, weights, schedule, rng)?;
        }
        Ok(state.z)
    }

    /// Mean and isotropic per-coordinate variance of the weighted mixture.
    pub fn moments(&self, weights: &[T]) -> Result<(Vec<T>, T)> {
        self.check_weights(weights)?;
        let total = weights.iter().fold(T::zero(), |a, &w| a + w);
        let d = self.dim();
        let mut mean = vec![T::zero(); d];
        for (c, &w) in self.components.iter().zip(weights) {
            for (m, &mu) in mean.iter_mut().zip(&c.mu) {
                *m += w / total * mu;
            }
        }
        let mut var = T::zero();
        for (c, &w) in self.components.iter().zip(weights) {
            let spread = squared_distance(&c.mu, &mean) / T::lit(d as f64);
            var += w / total * (c.var + spread);
        }
        Ok((mean, var))
    }

    /// Clean-data log density `log sum_k w_k N(x; mu_k, var_k I)`.
    pub fn log_density(&self, x: &[T], weights: &[T]) -> Result<T> {
        self.check_weights(weights)?;
        self.check_point(x)?;
        Ok(log_sum_exp(&self.log_joint(x, T::zero(), weights)))
    }

    /// Value of `attribute` carrying the most responsibility mass at `t = 0`
    /// under the unconditional weights. Ties resolve to the earlier value in scheme order.
    pub fn map_label(&self, x: &[T], attribute: &str) -> Result<&str> {
        let values = self.scheme.values(attribute)?;
        let r = self.responsibilities(x, T::zero(), &self.unconditional_weights)?;
        let mut mass = vec![T::zero(); values.len()];
        for (c, &rk) in self.components.iter().zip(&r) {
            let label = &c.labels[attribute];
            if let Some(i) = values.iter().position(|v| v == label) {
                mass[i] += rk;
            }
        }
        let mut best = 0;
        for i in 1..mass.len() {
            if mass[i] > mass[best] {
                best = i;
            }
        }
        Ok(&values[best])
    }

    /// Index of the component with the largest unconditional responsibility at `t = 0`.
    pub fn map_component(&self, x: &[T]) -> Result<usize> {
        let r = self.responsibilities(x, T::zero(), &self.unconditional_weights)?;
        let mut best = 0;
        for (i, &v) in r.iter().enumerate() {
            if v > r[best] {
                best = i;
            }
        }
        Ok(best)
    }
}

impl<T: Real + for<'de> Deserialize<'de>> ConceptWorld<T> {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let world: Self = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        world.validate()?;
        Ok(world)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

impl<T: Real + Serialize> ConceptWorld<T> {
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()?).map_err(|e| Error::io(path, e))
    }
}

fn check_simplex<T: Real>(w: &[T], k: usize, what: &str) -> Result<()> {
    if w.len() != k {
        return Err(Error::validation(format!(
            "`{what}` weights have {} entries for {k} components",
            w.len()
        )));
    }
    if w.iter().any(|&x| !(x >= T::zero()) || !x.is_finite()) {
        return Err(Error::validation(format!("`{what}` weights must be non-negative")));
    }
    let sum = w.iter().fold(T::zero(), |a, &x| a + x);
    if (sum - T::one()).abs() > T::simplex_tolerance() {
        return Err(Error::validation(format!("`{what}` weights sum to {sum}, not 1")));
    }
    Ok(())
}

pub(crate) fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let sum = xs.iter().fold(T::zero(), |a, &x| a + (x - max).exp());
    max + sum.ln()
}

/// Categorical draw over non-negative (not necessarily normalized) weights.
pub(crate) fn sample_index<T: Real, R: Rng + ?Sized>(weights: &[T], rng: &mut R) -> usize {
    let total: f64 = weights.iter().map(|w| w.to_f64_lossy()).sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.iter().enumerate() {
        let w = w.to_f64_lossy();
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Places `k` means with neighbouring distance `separation` in `dim` dimensions:
/// on a line for `dim == 1`, otherwise on a circle in the first two coordinates.
pub fn layout_means<T: Real>(k: usize, dim: usize, separation: f64) -> Vec<Vec<T>> {
    (0..k)
        .map(|i| {
            let mut mu = vec![T::zero(); dim];
            if dim == 1 || k == 1 {
                let offset = (i as f64 - (k as f64 - 1.0) / 2.0) * separation;
                mu[0] = T::lit(offset);
            } else {
                let radius = if k == 2 {
                    separation / 2.0
                } else {
                    separation / (2.0 * (std::f64::consts::PI / k as f64).sin())
                };
                let angle = std::f64::consts::TAU * i as f64 / k as f64;
                mu[0] = T::lit(radius * angle.cos());
                mu[1] = T::lit(radius * angle.sin());
            }
            mu
        })
        .collect()
}

struct WorldSpec<'a> {
    name: &'a str,
    focus_attribute: &'a str,
    biased_value: &'a str,
    /// (gender, ethnicity, age, prompt weight)
    components: &'a [(&'a str, &'a str, &'a str, f64)],
}

// Prompt weights follow the base-model label shares reported for each occupation.
const NURSE: WorldSpec<'static> = WorldSpec {
    name: "nurse",
    focus_attribute: "gender",
    biased_value: "female",
    components: &[
        ("female", "white", "young", 0.995 * 0.75),
        ("female", "black", "middle-age", 0.995 * 0.25),
        ("male", "black", "middle-age", 0.005 * 0.25),
        ("male", "white", "young", 0.005 * 0.75),
    ],
};

const FIREFIGHTER: WorldSpec<'static> = WorldSpec {
    name: "firefighter",
    focus_attribute: "ethnicity",
    biased_value: "white",
    components: &[
        ("male", "white", "young", 0.885),
        ("male", "black", "middle-age", 0.0975),
        ("male", "asian", "young", 0.0),
        ("male", "indian", "young", 0.0175),
    ],
};

const CEO: WorldSpec<'static> = WorldSpec {
    name: "ceo",
    focus_attribute: "age",
    biased_value: "elderly",
    components: &[
        ("male", "white", "elderly", 0.5575),
        ("male", "white", "middle-age", 0.43),
        ("male", "white", "young", 0.0125),
    ],
};

fn build_world<T: Real>(spec: &WorldSpec<'_>, dim: usize, separation: f64) -> Result<ConceptWorld<T>> {
    let k = spec.components.len();
    let means = layout_means::<T>(k, dim, separation);
    let components = spec
        .components
        .iter()
        .zip(means)
        .map(|(&(g, e, a, _), mu)| GaussianComponent {
            mu,
            var: T::one(),
            labels: [("gender", g), ("ethnicity", e), ("age", a)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        })
        .collect::<Vec<_>>();

    let floored: Vec<f64> = spec.components.iter().map(|c| c.3.max(WEIGHT_FLOOR)).collect();
    let total: f64 = floored.iter().sum();
    let prompt: Vec<T> = floored.iter().map(|w| T::lit(w / total)).collect();

    let carriers = components
        .iter()
        .filter(|c| c.labels[spec.focus_attribute] == spec.biased_value)
        .count();
    let bias: Vec<T> = components
        .iter()
        .map(|c| {
            if c.labels[spec.focus_attribute] == spec.biased_value {
                T::one() / T::lit(carriers as f64)
            } else {
                T::zero()
            }
        })
        .collect();
    let uniform = vec![T::one() / T::lit(k as f64); k];

    let bias_id = format!("bias:{}", spec.biased_value);
    let mut conditions = BTreeMap::new();
    conditions.insert(spec.name.to_string(), prompt);
    conditions.insert(bias_id.clone(), bias);

    ConceptWorld::new(spec.name, AttributeScheme::default(), components, conditions, uniform)?
        .with_focus(BiasFocus {
            attribute: spec.focus_attribute.to_string(),
            biased_value: spec.biased_value.to_string(),
            prompt_condition: spec.name.to_string(),
            bias_condition: bias_id,
        })
}

/// The `nurse`, `firefighter` and `ceo` worlds in two dimensions.
pub fn builtin_worlds<T: Real>() -> BTreeMap<String, ConceptWorld<T>> {
    builtin_worlds_with(2, DEFAULT_SEPARATION).expect("builtin worlds are valid")
}

pub fn builtin_worlds_with<T: Real>(
    dim: usize,
    separation: f64,
) -> Result<BTreeMap<String, ConceptWorld<T>>> {
    if dim == 0 {
        return Err(Error::validation("dimension must be at least 1"));
    }
    if !(separation > 0.0) {
        return Err(Error::validation("separation must be positive"));
    }
    [NURSE, FIREFIGHTER, CEO]
        .iter()
        .map(|spec| Ok((spec.name.to_string(), build_world(spec, dim, separation)?)))
        .collect()
}

pub fn builtin_world<T: Real>(name: &str) -> Result<ConceptWorld<T>> {
    builtin_worlds::<T>()
        .remove(name)
        .ok_or_else(|| Error::Lookup { kind: "world", name: name.to_string() })
}
