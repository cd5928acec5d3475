use std::path::{Path, PathBuf};
use std::sync::Arc;

use decodi_core::evaluation::{
    annotate_samples, build_report, summary_text, write_comparisons_csv, write_ratio_csv,
    write_report_json, ArmData, EvalReport,
};
use decodi_core::experiment::{run_sweep, write_sweep_csv, SweepRow, SweepSpec};
use decodi_core::sampler::{generate_batch_with_jobs, read_records, seeded_rng, write_records};
use decodi_core::{builtin_worlds, Error, GuidanceConfig, Mode, Result, RunConfig, SampleRecord};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ResolvedConfig;

pub const ORIGINAL_RECORDS: &str = "original.jsonl";
pub const DEBIASED_RECORDS: &str = "debiased.jsonl";
pub const MANIFEST: &str = "manifest.json";

/// Exit status for an error: 1 validation, 2 numeric failure, 3 I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NumericFailure { .. } => 2,
        Error::Io { .. } => 3,
        _ => 1,
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Enough to regenerate any single record: world hash, guidance and seed list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifact_version: String,
    pub config_hash: String,
    pub world: String,
    pub world_hash: String,
    pub prompt_condition: String,
    pub bias_condition: String,
    pub per_step_variance: f64,
    pub guidance: GuidanceConfig,
    pub seeds: Vec<u64>,
    pub files: Vec<String>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn run_config(r: &ResolvedConfig, mode: Mode) -> RunConfig {
    let mut run = RunConfig::new(Arc::new(r.world.clone()), r.prompt_condition.clone())
        .with_guidance(r.config.guidance)
        .with_seeds(r.seeds.clone());
    run.per_step_variance = r.config.per_step_variance;
    match mode {
        Mode::Original => run,
        Mode::Debiased => run.debiased(r.bias_condition.clone()),
    }
}

fn generate_arm(r: &ResolvedConfig, mode: Mode) -> Result<Vec<SampleRecord>> {
    let out = generate_batch_with_jobs(&run_config(r, mode), r.config.jobs)?;
    for (seed, e) in &out.failures {
        log::error!("{mode} seed {seed}: {e}");
    }
    out.into_result()
}

/// Generates both arms into `out_dir` and writes the manifest. Returns the written paths.
pub fn cmd_generate(r: &ResolvedConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    let original = generate_arm(r, Mode::Original)?;
    let debiased = generate_arm(r, Mode::Debiased)?;
    let mut written = Vec::new();
    for (name, recs) in [(ORIGINAL_RECORDS, &original), (DEBIASED_RECORDS, &debiased)] {
        let path = out_dir.join(name);
        write_records(&path, recs)?;
        written.push(path);
    }
    let world_text = r.world.to_toml_string()?;
    let world_path = out_dir.join("world.toml");
    std::fs::write(&world_path, &world_text).map_err(|e| io_err(&world_path, e))?;
    written.push(world_path);

    let manifest = Manifest {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: sha256_hex(r.config.to_toml_string().as_bytes()),
        world: r.world.name().to_string(),
        world_hash: sha256_hex(world_text.as_bytes()),
        prompt_condition: r.prompt_condition.clone(),
        bias_condition: r.bias_condition.clone(),
        per_step_variance: r.config.per_step_variance,
        guidance: r.config.guidance,
        seeds: r.seeds.clone(),
        files: vec![ORIGINAL_RECORDS.into(), DEBIASED_RECORDS.into(), "world.toml".into()],
    };
    let path = out_dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
    written.push(path);
    Ok(written)
}

fn annotator_seed(base: u64, id: &str, mode: Mode) -> u64 {
    let digest = Sha256::digest(format!("{id}/{mode}").as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    base ^ u64::from_le_bytes(bytes)
}

fn load_arm(r: &ResolvedConfig, path: &Path, mode: Mode) -> Result<ArmData> {
    if !path.exists() {
        return Err(io_err(path, "record file not found"));
    }
    let records: Vec<SampleRecord> = read_records(path)?;
    if records.is_empty() {
        return Err(Error::Validation(format!("{} has no records", path.display())));
    }
    for rec in &records {
        if rec.x0.len() != r.world.dim() {
            return Err(Error::Validation(format!(
                "{}: seed {} has dimension {}, world `{}` has {}",
                path.display(),
                rec.seed,
                rec.x0.len(),
                r.world.name(),
                r.world.dim()
            )));
        }
        if rec.prompt_condition != r.prompt_condition {
            return Err(Error::Validation(format!(
                "{}: seed {} was generated for `{}`, config expects `{}`",
                path.display(),
                rec.seed,
                rec.prompt_condition,
                r.prompt_condition
            )));
        }
        if rec.mode != mode {
            return Err(Error::Validation(format!(
                "{}: seed {} is a {} record in the {mode} file",
                path.display(),
                rec.seed,
                rec.mode
            )));
        }
    }
    let samples: Vec<Vec<f64>> = records.into_iter().map(|r| r.x0).collect();
    let annotations = r
        .config
        .annotators
        .iter()
        .map(|a| {
            let mut rng = seeded_rng(annotator_seed(r.config.annotation_seed, &a.id, mode));
            annotate_samples(&samples, &r.world, a, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ArmData { mode, samples, annotations })
}

/// Annotates both record files and writes `report.json`, `ratios.csv`,
/// `comparisons.csv` and `summary.txt` into `out_dir`.
pub fn cmd_evaluate(
    r: &ResolvedConfig,
    original: &Path,
    debiased: &Path,
    out_dir: &Path,
) -> Result<EvalReport> {
    let orig = load_arm(r, original, Mode::Original)?;
    let deb = load_arm(r, debiased, Mode::Debiased)?;
    let mut rng = seeded_rng(r.config.annotation_seed ^ 0x5eed_0f_7ab1e);
    let report = build_report(&orig, &deb, &r.world, &r.prompt_condition, r.config.reference_draws, &mut rng)?;
    ensure_dir(out_dir)?;
    write_report_json(&report, out_dir.join("report.json"))?;
    write_ratio_csv(&report, out_dir.join("ratios.csv"))?;
    write_comparisons_csv(&report, out_dir.join("comparisons.csv"))?;
    let summary = out_dir.join("summary.txt");
    std::fs::write(&summary, summary_text(&report)).map_err(|e| io_err(&summary, e))?;
    Ok(report)
}

/// Runs the configured grid and writes `sweep.csv`.
pub fn cmd_sweep(r: &ResolvedConfig, out_dir: &Path) -> Result<Vec<SweepRow>> {
    let world = Arc::new(r.world.clone());
    let focus = r.world.focus().cloned();
    let (attribute, biased_value) = match focus {
        Some(f) if f.bias_condition == r.bias_condition => (f.attribute, f.biased_value),
        _ => {
            return Err(Error::Validation(
                "field `bias_condition`: sweep needs a world whose bias focus matches the bias condition".into(),
            ))
        }
    };
    let spec = SweepSpec {
        world,
        prompt_condition: r.prompt_condition.clone(),
        bias_condition: r.bias_condition.clone(),
        attribute,
        biased_value,
        guidance: r.config.guidance,
        per_step_variance: r.config.per_step_variance,
        seeds: r.seeds.clone(),
        jobs: r.config.jobs,
    };
    let rows = run_sweep(&spec, &r.config.sweep)?;
    ensure_dir(out_dir)?;
    write_sweep_csv(&rows, out_dir.join("sweep.csv"))?;
    Ok(rows)
}

/// Human-readable table of builtin worlds and their biased weights.
pub fn worlds_listing() -> String {
    let mut s = String::new();
    for (name, w) in builtin_worlds::<f64>() {
        let Some(f) = w.focus() else { continue };
        let prompt = w.condition_weights(&f.prompt_condition).expect("builtin condition");
        s += &format!(
            "{name}: {} biased toward {} (prompt `{}`, bias condition `{}`)\n",
            f.attribute, f.biased_value, f.prompt_condition, f.bias_condition
        );
        for value in w.scheme().values(&f.attribute).expect("builtin attribute") {
            let mass = w.label_mass(prompt, &f.attribute, value);
            if w.components().iter().any(|c| &c.labels[&f.attribute] == value) {
                s += &format!("  {value:<12} {:>8.4}\n", mass);
            }
        }
    }
    s
}
