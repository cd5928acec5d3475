//! Seeded end-to-end generation under pure CFG or bias-avoiding guidance.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::diffusion::{reverse_step, LatentState, NoiseSchedule};
use crate::error::{Error, Result};
use crate::guidance::{cfg_combine, decodi_combine, GuidanceConfig, MomentumState};
use crate::scalar::{all_finite, Real};
use crate::world::{Condition, ConceptWorld};

/// Seeds per arm in the default protocol.
pub const DEFAULT_SEED_COUNT: u64 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Classifier-free guidance only.
    Original,
    /// Guidance with the bias-avoidance term.
    Debiased,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Original => "original",
            Mode::Debiased => "debiased",
        })
    }
}

/// Per-seed random source. Derived from the seed alone so batch results do not
/// depend on scheduling.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone)]
pub struct RunConfig<T> {
    pub world: Arc<ConceptWorld<T>>,
    pub prompt_condition: String,
    pub bias_condition: Option<String>,
    pub guidance: GuidanceConfig<T>,
    pub per_step_variance: T,
    pub seeds: Vec<u64>,
    pub mode: Mode,
    pub record_trajectory: bool,
}

impl<T: Real> RunConfig<T> {
    /// Original-mode run over seeds `0..200` with default guidance.
    pub fn new(world: Arc<ConceptWorld<T>>, prompt_condition: impl Into<String>) -> Self {
        Self {
            world,
            prompt_condition: prompt_condition.into(),
            bias_condition: None,
            guidance: GuidanceConfig::default(),
            per_step_variance: T::one(),
            seeds: (0..DEFAULT_SEED_COUNT).collect(),
            mode: Mode::Original,
            record_trajectory: false,
        }
    }

    pub fn debiased(mut self, bias_condition: impl Into<String>) -> Self {
        self.bias_condition = Some(bias_condition.into());
        self.mode = Mode::Debiased;
        self
    }

    pub fn original(mut self) -> Self {
        self.mode = Mode::Original;
        self
    }

    pub fn with_guidance(mut self, guidance: GuidanceConfig<T>) -> Self {
        self.guidance = guidance;
        self
    }

    pub fn with_seeds(mut self, seeds: Vec<u64>) -> Self {
        self.seeds = seeds;
        self
    }

    pub fn with_trajectory(mut self, record: bool) -> Self {
        self.record_trajectory = record;
        self
    }

    pub fn schedule(&self) -> Result<NoiseSchedule<T>> {
        NoiseSchedule::new(self.guidance.steps, self.per_step_variance)
    }

    pub fn dim(&self) -> usize {
        self.world.dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.guidance.validate()?;
        self.schedule()?;
        self.world.condition_weights(&self.prompt_condition)?;
        match (&self.mode, &self.bias_condition) {
            (Mode::Debiased, None) => {
                return Err(Error::validation("debiased mode requires a bias condition"));
            }
            (_, Some(b)) => {
                self.world.condition_weights(b)?;
            }
            _ => {}
        }
        if self.seeds.is_empty() {
            return Err(Error::validation("seed list is empty"));
        }
        let mut seen = HashSet::with_capacity(self.seeds.len());
        if let Some(dup) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(Error::validation(format!("seed {dup} listed twice")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord<T> {
    pub seed: u64,
    pub mode: Mode,
    #[serde(rename = "condition")]
    pub prompt_condition: String,
    pub x0: Vec<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<LatentState<T>>>,
}

/// Runs one full reverse trajectory from `t = T` to `t = 0`.
pub fn generate_one<T: Real>(run: &RunConfig<T>, seed: u64) -> Result<SampleRecord<T>> {
    run.validate()?;
    generate_validated(run, seed)
}

fn generate_validated<T: Real>(run: &RunConfig<T>, seed: u64) -> Result<SampleRecord<T>> {
    let world = &*run.world;
    let schedule = run.schedule()?;
    let steps = schedule.steps();
    let prompt = Condition::Named(run.prompt_condition.clone());
    let bias = match (run.mode, &run.bias_condition) {
        (Mode::Debiased, Some(b)) => Some(Condition::Named(b.clone())),
        _ => None,
    };
    let mut rng = seeded_rng(seed);

    // Moment-matched Gaussian stand-in for the time-T marginal.
    let (mean, var) = world.moments(world.condition_weights(&run.prompt_condition)?)?;
    let sd = (var + schedule.cumulative_variance(steps)).sqrt();
    let z = mean.iter().map(|&m| m + sd * T::standard_normal(&mut rng)).collect();
    let mut state = LatentState::new(z, steps);

    let mut momentum = MomentumState::new(world.dim());
    let mut trajectory = run.record_trajectory.then(|| {
        let mut v = Vec::with_capacity(steps + 1);
        v.push(state.clone());
        v
    });

    while state.t > 0 {
        let eps_u = world.analytic_eps(&state, &Condition::Unconditional, &schedule)?;
        let eps_c = world.analytic_eps(&state, &prompt, &schedule)?;
        let eps = match &bias {
            Some(b) => {
                let eps_b = world.analytic_eps(&state, b, &schedule)?;
                let (eps, next) = decodi_combine(&eps_u, &eps_c, &eps_b, &run.guidance, &momentum)?;
                momentum = next;
                eps
            }
            None => cfg_combine(&eps_u, &eps_c, run.guidance.guidance_scale),
        };
        if !all_finite(&eps) {
            return Err(Error::NumericFailure { seed, step: state.t });
        }
        let step = state.t;
        state = reverse_step(&state, &eps, &schedule, &mut rng)?;
        if !all_finite(&state.z) {
            return Err(Error::NumericFailure { seed, step });
        }
        if let Some(tr) = trajectory.as_mut() {
            tr.push(state.clone());
        }
    }

    Ok(SampleRecord {
        seed,
        mode: run.mode,
        prompt_condition: run.prompt_condition.clone(),
        x0: state.z,
        trajectory,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput<T> {
    /// Successful records in seed-list order.
    pub records: Vec<SampleRecord<T>>,
    pub failures: Vec<(u64, Error)>,
}

impl<T> BatchOutput<T> {
    pub fn into_result(self) -> Result<Vec<SampleRecord<T>>> {
        match self.failures.into_iter().next() {
            Some((_, e)) => Err(e),
            None => Ok(self.records),
        }
    }
}

/// One record per seed on rayon's global pool.
pub fn generate_batch<T: Real>(run: &RunConfig<T>) -> Result<BatchOutput<T>> {
    run.validate()?;
    let results: Vec<_> = run
        .seeds
        .par_iter()
        .map(|&seed| (seed, generate_validated(run, seed)))
        .collect();
    Ok(split(results))
}

/// As [`generate_batch`] with at most `jobs` worker threads. `jobs == 1` runs inline.
pub fn generate_batch_with_jobs<T: Real>(run: &RunConfig<T>, jobs: usize) -> Result<BatchOutput<T>> {
    run.validate()?;
    if jobs <= 1 {
        let results = run
            .seeds
            .iter()
            .map(|&seed| (seed, generate_validated(run, seed)))
            .collect();
        return Ok(split(results));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::validation(format!("cannot start {jobs} worker threads: {e}")))?;
    pool.install(|| generate_batch(run))
}

fn split<T>(results: Vec<(u64, Result<SampleRecord<T>>)>) -> BatchOutput<T> {
    let mut records = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push((seed, e)),
        }
    }
    BatchOutput { records, failures }
}

/// Writes one JSON object per line.
pub fn write_records<T: Serialize>(path: impl AsRef<Path>, records: &[SampleRecord<T>]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_records_to(&mut out, records).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_records_to<T: Serialize, W: Write>(out: &mut W, records: &[SampleRecord<T>]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<SampleRecord<T>>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), i + 1)))?;
        records.push(rec);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::builtin_world;

    fn nurse() -> Arc<ConceptWorld<f64>> {
        Arc::new(builtin_world("nurse").unwrap())
    }

    #[test]
    fn validation_errors() {
        let run = RunConfig::new(nurse(), "nurse");
        assert!(run.validate().is_ok());
        let mut bad = run.clone();
        bad.mode = Mode::Debiased;
        assert!(matches!(bad.validate(), Err(Error::Validation(_))));
        assert!(matches!(RunConfig::new(nurse(), "doctor").validate(), Err(Error::Lookup { .. })));
        assert!(run.clone().with_seeds(vec![]).validate().is_err());
        assert!(run.clone().with_seeds(vec![1, 2, 1]).validate().is_err());
        assert!(run.clone().debiased("bias:male").validate().is_err());
    }

    #[test]
    fn trajectory_shape() {
        let run = RunConfig::new(nurse(), "nurse").debiased("bias:female").with_trajectory(true);
        let rec = generate_one(&run, 17).unwrap();
        let tr = rec.trajectory.as_ref().unwrap();
        assert_eq!(tr.len(), run.guidance.steps + 1);
        for (i, s) in tr.iter().enumerate() {
            assert_eq!(s.t, run.guidance.steps - i);
        }
        assert_eq!(tr.last().unwrap().z, rec.x0);

        let plain = generate_one(&run.clone().with_trajectory(false), 17).unwrap();
        assert!(plain.trajectory.is_none());
        assert_eq!(plain.x0, rec.x0);
    }

    #[test]
    fn repeated_runs_match() {
        let run = RunConfig::new(nurse(), "nurse").debiased("bias:female");
        assert_eq!(generate_one(&run, 5).unwrap(), generate_one(&run, 5).unwrap());
        assert_ne!(generate_one(&run, 5).unwrap().x0, generate_one(&run, 6).unwrap().x0);
    }

    #[test]
    fn numeric_failure_carries_seed_and_step() {
        let guidance = GuidanceConfig { guidance_scale: 1e308, bias_scale: 1e308, warmup_steps: 0, ..Default::default() };
        let run = RunConfig::new(nurse(), "nurse").debiased("bias:female").with_guidance(guidance);
        match generate_one(&run, 3) {
            Err(Error::NumericFailure { seed: 3, step }) => assert!((1..=50).contains(&step)),
            other => panic!("expected numeric failure, got {other:?}"),
        }
        let out = generate_batch(&run.with_seeds(vec![1, 2])).unwrap();
        assert_eq!(out.failures.iter().map(|f| f.0).collect::<Vec<_>>(), vec![1, 2]);
        assert!(out.records.is_empty());
    }

    #[test]
    fn records_round_trip_through_file() {
        let run = RunConfig::new(nurse(), "nurse").with_seeds((0..5).collect());
        let recs = generate_batch(&run).unwrap().into_result().unwrap();
        let dir = std::env::temp_dir().join(format!("decodi-records-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("original.jsonl");
        write_records(&path, &recs).unwrap();
        let back: Vec<SampleRecord<f64>> = read_records(&path).unwrap();
        assert_eq!(back, recs);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().next().unwrap().starts_with(r#"{"seed":0,"mode":"original","condition":"nurse","x0":["#));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
