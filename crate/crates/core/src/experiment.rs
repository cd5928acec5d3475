//! Arm-level metrics and hyperparameter sweeps over the bias-guidance knobs.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{normalized_kl_fairness, quality_proxy};
use crate::guidance::GuidanceConfig;
use crate::sampler::{generate_batch_with_jobs, Mode, RunConfig};
use crate::world::ConceptWorld;

/// Count of MAP labels per value of `attribute`, in scheme order.
pub fn map_label_counts(world: &ConceptWorld<f64>, samples: &[Vec<f64>], attribute: &str) -> Result<Vec<u64>> {
    let values = world.scheme().values(attribute)?;
    let mut counts = vec![0u64; values.len()];
    for x in samples {
        let l = world.map_label(x, attribute)?;
        let i = values.iter().position(|v| v == l).expect("map label is a scheme value");
        counts[i] += 1;
    }
    Ok(counts)
}

/// Fraction of samples whose MAP label for `attribute` is `value`.
pub fn label_share(world: &ConceptWorld<f64>, samples: &[Vec<f64>], attribute: &str, value: &str) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::validation("no samples"));
    }
    let mut hits = 0usize;
    for x in samples {
        if world.map_label(x, attribute)? == value {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}

/// Histogram over MAP component indices, normalized.
pub fn component_frequencies(world: &ConceptWorld<f64>, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut counts = vec![0usize; world.components().len()];
    for x in samples {
        counts[world.map_component(x)?] += 1;
    }
    let n = samples.len().max(1) as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub bias_scale: f64,
    pub momentum_scale: f64,
    pub momentum_decay: f64,
    pub warmup_steps: usize,
}

impl SweepPoint {
    fn apply(&self, base: &GuidanceConfig<f64>) -> GuidanceConfig<f64> {
        GuidanceConfig {
            bias_scale: self.bias_scale,
            momentum_scale: self.momentum_scale,
            momentum_decay: self.momentum_decay,
            warmup_steps: self.warmup_steps,
            ..*base
        }
    }
}

/// Cartesian grid; an empty axis falls back to the base configuration's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub bias_scale: Vec<f64>,
    pub momentum_scale: Vec<f64>,
    pub momentum_decay: Vec<f64>,
    pub warmup_steps: Vec<usize>,
}

impl SweepGrid {
    pub fn bias_scales(values: &[f64]) -> Self {
        Self {
            bias_scale: values.to_vec(),
            ..Default::default()
        }
    }

    /// Grid points in axis order with duplicates removed (first occurrence kept).
    pub fn points(&self, base: &GuidanceConfig<f64>) -> Vec<SweepPoint> {
        fn axis<T: Copy>(v: &[T], d: T) -> Vec<T> {
            if v.is_empty() { vec![d] } else { v.to_vec() }
        }
        let mut out: Vec<SweepPoint> = Vec::new();
        for &bias_scale in &axis(&self.bias_scale, base.bias_scale) {
            for &momentum_scale in &axis(&self.momentum_scale, base.momentum_scale) {
                for &momentum_decay in &axis(&self.momentum_decay, base.momentum_decay) {
                    for &warmup_steps in &axis(&self.warmup_steps, base.warmup_steps) {
                        let p = SweepPoint { bias_scale, momentum_scale, momentum_decay, warmup_steps };
                        if out.contains(&p) {
                            log::warn!("dropping duplicate sweep point {p:?}");
                        } else {
                            out.push(p);
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `None` for the unguided baseline row.
    pub point: Option<SweepPoint>,
    pub fairness: f64,
    pub quality: f64,
    pub biased_percentage: f64,
}

impl SweepRow {
    pub fn is_baseline(&self) -> bool {
        self.point.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub world: Arc<ConceptWorld<f64>>,
    pub prompt_condition: String,
    pub bias_condition: String,
    pub attribute: String,
    pub biased_value: String,
    pub guidance: GuidanceConfig<f64>,
    pub per_step_variance: f64,
    pub seeds: Vec<u64>,
    pub jobs: usize,
}

impl SweepSpec {
    /// Uses the world's recorded bias focus for conditions and attribute.
    pub fn for_world(world: Arc<ConceptWorld<f64>>, seeds: Vec<u64>) -> Result<Self> {
        let focus = world
            .focus()
            .cloned()
            .ok_or_else(|| Error::validation(format!("world `{}` records no bias focus", world.name())))?;
        Ok(Self {
            world,
            prompt_condition: focus.prompt_condition,
            bias_condition: focus.bias_condition,
            attribute: focus.attribute,
            biased_value: focus.biased_value,
            guidance: GuidanceConfig::default(),
            per_step_variance: 1.0,
            seeds,
            jobs: 1,
        })
    }

    fn run(&self, mode: Mode, guidance: GuidanceConfig<f64>) -> RunConfig<f64> {
        let mut run = RunConfig::new(self.world.clone(), self.prompt_condition.clone())
            .with_guidance(guidance)
            .with_seeds(self.seeds.clone());
        run.per_step_variance = self.per_step_variance;
        match mode {
            Mode::Original => run,
            Mode::Debiased => run.debiased(self.bias_condition.clone()),
        }
    }

    fn metrics(&self, run: &RunConfig<f64>, point: Option<SweepPoint>) -> Result<SweepRow> {
        let records = generate_batch_with_jobs(run, self.jobs)?.into_result()?;
        let samples: Vec<Vec<f64>> = records.into_iter().map(|r| r.x0).collect();
        let counts = map_label_counts(&self.world, &samples, &self.attribute)?;
        Ok(SweepRow {
            point,
            fairness: normalized_kl_fairness(&counts, counts.len())?,
            quality: quality_proxy(&samples, &self.world, &self.prompt_condition)?,
            biased_percentage: 100.0 * label_share(&self.world, &samples, &self.attribute, &self.biased_value)?,
        })
    }
}

/// Baseline (original-model) row followed by one debiased row per distinct grid point.
pub fn run_sweep(spec: &SweepSpec, grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    let points = grid.points(&spec.guidance);
    if points.is_empty() {
        return Err(Error::validation("sweep grid is empty"));
    }
    for p in &points {
        p.apply(&spec.guidance).validate()?;
    }
    let mut rows = vec![spec.metrics(&spec.run(Mode::Original, spec.guidance), None)?];
    for p in points {
        rows.push(spec.metrics(&spec.run(Mode::Debiased, p.apply(&spec.guidance)), Some(p))?);
    }
    Ok(rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<std::path::Path>) -> Result<()> {
    let path = path.as_ref();
    let err = |e: csv::Error| Error::io(path, e);
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record([
        "row",
        "model",
        "bias_scale",
        "momentum_scale",
        "momentum_decay",
        "warmup_steps",
        "fairness",
        "quality",
        "biased_percentage",
    ])
    .map_err(err)?;
    for (i, r) in rows.iter().enumerate() {
        let (model, sb, sm, beta, delta) = match &r.point {
            None => ("original".to_string(), String::new(), String::new(), String::new(), String::new()),
            Some(p) => (
                "debiased".to_string(),
                p.bias_scale.to_string(),
                p.momentum_scale.to_string(),
                p.momentum_decay.to_string(),
                p.warmup_steps.to_string(),
            ),
        };
        w.write_record([
            (i + 1).to_string(),
            model,
            sb,
            sm,
            beta,
            delta,
            format!("{:.6}", r.fairness),
            format!("{:.6}", r.quality),
            format!("{:.2}", r.biased_percentage),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
