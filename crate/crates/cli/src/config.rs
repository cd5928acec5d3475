use std::path::{Path, PathBuf};

use decodi_core::evaluation::Annotator;
use decodi_core::experiment::SweepGrid;
use decodi_core::world::{builtin_worlds_with, DEFAULT_SEPARATION};
use decodi_core::{ConceptWorld, Error, GuidanceConfig, Result};
use serde::{Deserialize, Serialize};

/// Everything one experiment needs; serialized as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Builtin world name, or a path to a world file.
    pub world: String,
    /// Defaults to the world's own prompt condition.
    pub prompt_condition: Option<String>,
    /// Defaults to the world's own bias condition.
    pub bias_condition: Option<String>,
    /// Latent dimension for builtin worlds.
    pub dim: usize,
    /// Neighbouring-mean distance for builtin worlds, in component standard deviations.
    pub separation: f64,
    pub per_step_variance: f64,
    /// Seeds `0..seed_count`, unless `seed_file` is given.
    pub seed_count: u64,
    pub seed_file: Option<PathBuf>,
    pub annotators: Vec<Annotator>,
    /// Base seed for the annotators' label noise.
    pub annotation_seed: u64,
    /// Monte Carlo draws behind the quality reference.
    pub reference_draws: usize,
    pub out: PathBuf,
    pub jobs: usize,
    pub guidance: GuidanceConfig,
    pub sweep: SweepGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            world: "nurse".to_string(),
            prompt_condition: None,
            bias_condition: None,
            dim: 2,
            separation: DEFAULT_SEPARATION,
            per_step_variance: 1.0,
            seed_count: 200,
            seed_file: None,
            annotators: vec![Annotator::new("eval-1", 0.0), Annotator::new("eval-2", 0.05)],
            annotation_seed: 0,
            reference_draws: 10_000,
            out: PathBuf::from("out"),
            jobs: 1,
            guidance: GuidanceConfig::default(),
            sweep: SweepGrid {
                bias_scale: vec![0.0, 1.0, 3.0, 7.0, 15.0],
                ..Default::default()
            },
        }
    }
}

/// A config with its world and seed list resolved.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub config: ExperimentConfig,
    pub world: ConceptWorld,
    pub prompt_condition: String,
    pub bias_condition: String,
    pub seeds: Vec<u64>,
}

fn field(name: &str, e: impl std::fmt::Display) -> Error {
    Error::Validation(format!("field `{name}`: {e}"))
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    fn load_world(&self) -> Result<ConceptWorld> {
        if self.dim == 0 {
            return Err(field("dim", "must be at least 1"));
        }
        if !(self.separation > 0.0) {
            return Err(field("separation", "must be positive"));
        }
        let mut builtins = builtin_worlds_with::<f64>(self.dim, self.separation)?;
        if let Some(w) = builtins.remove(&self.world) {
            return Ok(w);
        }
        let path = Path::new(&self.world);
        if path.exists() {
            let w = ConceptWorld::load(path)?;
            return Ok(w);
        }
        Err(field(
            "world",
            format!("`{}` is neither a builtin world nor an existing file", self.world),
        ))
    }

    fn load_seeds(&self) -> Result<Vec<u64>> {
        let seeds = match &self.seed_file {
            Some(path) => read_seed_file(path)?,
            None => (0..self.seed_count).collect(),
        };
        if seeds.is_empty() {
            return Err(field(
                if self.seed_file.is_some() { "seed_file" } else { "seed_count" },
                "no seeds",
            ));
        }
        Ok(seeds)
    }

    /// Validates every field and resolves the world and seeds. Nothing is generated.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        if !(self.per_step_variance > 0.0) || !self.per_step_variance.is_finite() {
            return Err(field("per_step_variance", "must be positive and finite"));
        }
        if self.jobs == 0 {
            return Err(field("jobs", "must be at least 1"));
        }
        self.guidance.validate().map_err(|e| field("guidance", e))?;
        if self.annotators.is_empty() {
            return Err(field("annotators", "at least one annotator is required"));
        }
        for (i, a) in self.annotators.iter().enumerate() {
            a.validate().map_err(|e| field(&format!("annotators[{i}].rho"), e))?;
            if self.annotators[..i].iter().any(|b| b.id == a.id) {
                return Err(field(&format!("annotators[{i}].id"), format!("duplicate id `{}`", a.id)));
            }
        }
        if self.reference_draws < 2 {
            return Err(field("reference_draws", "must be at least 2"));
        }
        let world = self.load_world()?;
        let focus = world.focus().cloned();
        let prompt_condition = self
            .prompt_condition
            .clone()
            .or_else(|| focus.as_ref().map(|f| f.prompt_condition.clone()))
            .ok_or_else(|| field("prompt_condition", "required for worlds without a bias focus"))?;
        let bias_condition = self
            .bias_condition
            .clone()
            .or_else(|| focus.as_ref().map(|f| f.bias_condition.clone()))
            .ok_or_else(|| field("bias_condition", "required for worlds without a bias focus"))?;
        world
            .condition_weights(&prompt_condition)
            .map_err(|e| field("prompt_condition", e))?;
        world
            .condition_weights(&bias_condition)
            .map_err(|e| field("bias_condition", e))?;
        let seeds = self.load_seeds()?;
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(field("seed_file", format!("seed {dup} listed twice")));
        }
        Ok(ResolvedConfig {
            config: self.clone(),
            world,
            prompt_condition,
            bias_condition,
            seeds,
        })
    }
}

/// One unsigned seed per line; blank lines and `#` comments are ignored.
pub fn read_seed_file(path: &Path) -> Result<Vec<u64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    text.lines()
        .enumerate()
        .filter_map(|(i, l)| {
            let l = l.split('#').next().unwrap_or("").trim();
            (!l.is_empty()).then_some((i, l))
        })
        .map(|(i, l)| {
            l.parse::<u64>().map_err(|e| {
                Error::Validation(format!("field `seed_file`: line {}: `{l}`: {e}", i + 1))
            })
        })
        .collect()
}
