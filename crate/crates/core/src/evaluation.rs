//! Annotation, ratio tables, annotator agreement, chi-square homogeneity,
//! normalized-KL fairness and the likelihood quality proxy.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::Mode;
use crate::scalar::Real;
use crate::stats::chi_square_sf;
use crate::world::{AttributeScheme, ConceptWorld};

/// Significance level used for flagging comparisons.
pub const ALPHA: f64 = 0.05;

/// Per-cell pseudo-count applied before computing the KL fairness score.
pub const FAIRNESS_SMOOTHING: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub sample_index: usize,
    pub annotator_id: String,
    pub labels: BTreeMap<String, String>,
}

/// A simulated annotator: the MAP label, replaced by a uniformly random
/// different value with probability `rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotator {
    pub id: String,
    #[serde(default)]
    pub rho: f64,
}

impl Annotator {
    pub fn new(id: impl Into<String>, rho: f64) -> Self {
        Self { id: id.into(), rho }
    }

    pub fn validate(&self) -> Result<()> {
        check_rho(self.rho)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::validation(format!("annotator noise rho must lie in [0, 1], got {rho}")))
    }
}

pub fn map_annotate<T: Real>(x0: &[T], world: &ConceptWorld<T>, attribute: &str) -> Result<String> {
    world.map_label(x0, attribute).map(str::to_string)
}

pub fn noisy_annotate<T: Real, R: Rng + ?Sized>(
    x0: &[T],
    world: &ConceptWorld<T>,
    attribute: &str,
    rho: f64,
    rng: &mut R,
) -> Result<String> {
    check_rho(rho)?;
    let clean = world.map_label(x0, attribute)?;
    let values = world.scheme().values(attribute)?;
    if values.len() < 2 || rng.random::<f64>() >= rho {
        return Ok(clean.to_string());
    }
    let others: Vec<&String> = values.iter().filter(|v| *v != clean).collect();
    Ok(others[rng.random_range(0..others.len())].clone())
}

/// Labels every attribute of every sample, in scheme order.
pub fn annotate_samples<T: Real, R: Rng + ?Sized>(
    samples: &[Vec<T>],
    world: &ConceptWorld<T>,
    annotator: &Annotator,
    rng: &mut R,
) -> Result<Vec<AnnotationRecord>> {
    annotator.validate()?;
    samples
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mut labels = BTreeMap::new();
            for attr in world.scheme().attributes() {
                let v = noisy_annotate(x, world, &attr.name, annotator.rho, rng)?;
                labels.insert(attr.name.clone(), v);
            }
            Ok(AnnotationRecord {
                sample_index: i,
                annotator_id: annotator.id.clone(),
                labels,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub value: String,
    pub count: u64,
    pub percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioTable {
    pub attribute: String,
    pub total: u64,
    pub rows: Vec<RatioRow>,
}

impl RatioTable {
    pub fn counts(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.count).collect()
    }

    pub fn percentage_of(&self, value: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.value == value).map(|r| r.percentage)
    }

    /// Value holding more than half of the records, if any.
    pub fn majority(&self) -> Option<&RatioRow> {
        self.rows.iter().find(|r| r.percentage > 50.0)
    }
}

fn label<'a>(rec: &'a AnnotationRecord, attribute: &str) -> Result<&'a str> {
    rec.labels.get(attribute).map(String::as_str).ok_or_else(|| {
        Error::validation(format!(
            "annotation of sample {} by `{}` has no `{attribute}` label",
            rec.sample_index, rec.annotator_id
        ))
    })
}

/// Counts per value over all records, in scheme order.
pub fn label_counts(
    annotations: &[AnnotationRecord],
    attribute: &str,
    scheme: &AttributeScheme,
) -> Result<Vec<u64>> {
    let values = scheme.values(attribute)?;
    let mut counts = vec![0u64; values.len()];
    for rec in annotations {
        let l = label(rec, attribute)?;
        let i = values.iter().position(|v| v == l).ok_or_else(|| {
            Error::validation(format!("`{l}` is not a legal {attribute}"))
        })?;
        counts[i] += 1;
    }
    Ok(counts)
}

pub fn ratio_table(
    annotations: &[AnnotationRecord],
    attribute: &str,
    scheme: &AttributeScheme,
) -> Result<RatioTable> {
    if annotations.is_empty() {
        return Err(Error::validation("cannot tabulate an empty annotation list"));
    }
    let counts = label_counts(annotations, attribute, scheme)?;
    Ok(ratio_table_from_counts(attribute, scheme.values(attribute)?, &counts))
}

pub fn ratio_table_from_counts(attribute: &str, values: &[String], counts: &[u64]) -> RatioTable {
    let total: u64 = counts.iter().sum();
    let rows = values
        .iter()
        .zip(counts)
        .map(|(v, &c)| RatioRow {
            value: v.clone(),
            count: c,
            percentage: if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 },
        })
        .collect();
    RatioTable {
        attribute: attribute.to_string(),
        total,
        rows,
    }
}

fn index_labels<'a>(
    annotations: &'a [AnnotationRecord],
    attribute: &str,
) -> Result<BTreeMap<usize, &'a str>> {
    let mut out = BTreeMap::new();
    for rec in annotations {
        if out.insert(rec.sample_index, label(rec, attribute)?).is_some() {
            return Err(Error::validation(format!(
                "sample {} annotated twice by the same annotator",
                rec.sample_index
            )));
        }
    }
    Ok(out)
}

/// Fraction of samples on which both annotators chose the same value.
pub fn agreement_rate(a: &[AnnotationRecord], b: &[AnnotationRecord], attribute: &str) -> Result<f64> {
    let la = index_labels(a, attribute)?;
    let lb = index_labels(b, attribute)?;
    if la.is_empty() {
        return Err(Error::validation("no annotations to compare"));
    }
    if !la.keys().eq(lb.keys()) {
        return Err(Error::validation("annotators labeled different sample sets"));
    }
    let agree = la.iter().filter(|(i, v)| lb[*i] == **v).count();
    Ok(agree as f64 / la.len() as f64)
}

/// Two annotators' label counts over the same categories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    categories: Vec<String>,
    counts_a: Vec<u64>,
    counts_b: Vec<u64>,
}

impl ContingencyTable {
    pub fn new(categories: Vec<String>, counts_a: Vec<u64>, counts_b: Vec<u64>) -> Result<Self> {
        if categories.len() != counts_a.len() || categories.len() != counts_b.len() {
            return Err(Error::validation("contingency rows and categories differ in length"));
        }
        if categories.len() < 2 {
            return Err(Error::validation("contingency table needs at least two categories"));
        }
        if counts_a.iter().sum::<u64>() == 0 || counts_b.iter().sum::<u64>() == 0 {
            return Err(Error::validation("contingency rows must have positive totals"));
        }
        Ok(Self { categories, counts_a, counts_b })
    }

    pub fn from_annotations(
        a: &[AnnotationRecord],
        b: &[AnnotationRecord],
        attribute: &str,
        scheme: &AttributeScheme,
    ) -> Result<Self> {
        Self::new(
            scheme.values(attribute)?.to_vec(),
            label_counts(a, attribute, scheme)?,
            label_counts(b, attribute, scheme)?,
        )
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn counts_a(&self) -> &[u64] {
        &self.counts_a
    }

    pub fn counts_b(&self) -> &[u64] {
        &self.counts_b
    }

    pub fn swapped(&self) -> Self {
        Self {
            categories: self.categories.clone(),
            counts_a: self.counts_b.clone(),
            counts_b: self.counts_a.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: u32,
    pub p_value: f64,
}

/// Pearson homogeneity test on a 2 x K table. Empty columns are dropped first.
pub fn chi_square_homogeneity(table: &ContingencyTable) -> Result<ChiSquare> {
    let cols: Vec<(f64, f64)> = table
        .counts_a
        .iter()
        .zip(&table.counts_b)
        .filter(|(a, b)| **a + **b > 0)
        .map(|(&a, &b)| (a as f64, b as f64))
        .collect();
    if cols.len() < 2 {
        return Err(Error::DegenerateTable(format!(
            "{} non-empty categor{} out of {}",
            cols.len(),
            if cols.len() == 1 { "y" } else { "ies" },
            table.categories.len()
        )));
    }
    let row_a: f64 = cols.iter().map(|c| c.0).sum();
    let row_b: f64 = cols.iter().map(|c| c.1).sum();
    let n = row_a + row_b;
    let statistic = cols
        .iter()
        .map(|&(a, b)| {
            let col = a + b;
            let ea = row_a * col / n;
            let eb = row_b * col / n;
            (a - ea) * (a - ea) / ea + (b - eb) * (b - eb) / eb
        })
        .sum::<f64>();
    let dof = (cols.len() - 1) as u32;
    Ok(ChiSquare {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
    })
}

/// `1 - KL(p_hat || uniform) / ln K` with half-count smoothing; 1 is perfectly balanced.
pub fn normalized_kl_fairness(counts: &[u64], categories: usize) -> Result<f64> {
    if categories < 2 {
        return Err(Error::validation("fairness needs at least two categories"));
    }
    if counts.len() != categories {
        return Err(Error::validation(format!(
            "{} counts supplied for {categories} categories",
            counts.len()
        )));
    }
    if counts.iter().sum::<u64>() == 0 {
        return Err(Error::validation("fairness needs at least one observation"));
    }
    // sorted so the result does not depend on category order
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let k = categories as f64;
    let total = sorted.iter().sum::<u64>() as f64 + FAIRNESS_SMOOTHING * k;
    let kl: f64 = sorted
        .iter()
        .map(|&c| {
            let smoothed = c as f64 + FAIRNESS_SMOOTHING;
            let ratio = smoothed * k / total;
            smoothed / total * ratio.ln()
        })
        .sum();
    Ok((1.0 - kl / k.ln()).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    /// Mean clean-data log density of the samples under the prompt mixture.
    pub proxy: f64,
    /// Monte Carlo estimate of the same quantity for on-distribution samples.
    pub reference: f64,
    pub reference_stderr: f64,
}

pub fn quality_proxy<T: Real>(samples: &[Vec<T>], world: &ConceptWorld<T>, condition: &str) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::validation("quality proxy needs at least one sample"));
    }
    let weights = world.condition_weights(condition)?;
    let mut sum = 0.0;
    for x in samples {
        sum += world.log_density(x, weights)?.to_f64_lossy();
    }
    Ok(sum / samples.len() as f64)
}

/// Expected log density of draws from the condition's own mixture, with its standard error.
pub fn quality_reference<T: Real, R: Rng + ?Sized>(
    world: &ConceptWorld<T>,
    condition: &str,
    draws: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if draws < 2 {
        return Err(Error::validation("quality reference needs at least two draws"));
    }
    let weights = world.condition_weights(condition)?;
    let mut values = Vec::with_capacity(draws);
    for _ in 0..draws {
        let x = world.sample_prior(weights, rng)?;
        values.push(world.log_density(&x, weights)?.to_f64_lossy());
    }
    let n = draws as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Samples of one arm plus each annotator's labels for them.
#[derive(Debug, Clone)]
pub struct ArmData {
    pub mode: Mode,
    pub samples: Vec<Vec<f64>>,
    pub annotations: Vec<Vec<AnnotationRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub mode: Mode,
    pub attribute: String,
    pub annotator_a: String,
    pub annotator_b: String,
    pub agreement: f64,
    /// `None` when fewer than two categories were used by either annotator.
    pub chi2: Option<ChiSquare>,
    pub bonferroni_p: Option<f64>,
    pub significant: bool,
}

impl Comparison {
    pub fn label(&self) -> String {
        format!("{} and {}", self.annotator_a, self.annotator_b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub mode: Mode,
    pub n_samples: usize,
    pub ratio_tables: Vec<RatioTable>,
    /// attribute -> fairness score in [0, 1]
    pub fairness: BTreeMap<String, f64>,
    pub quality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasFlag {
    pub attribute: String,
    pub value: String,
    pub percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub world: String,
    pub prompt_condition: String,
    pub arms: Vec<ArmReport>,
    pub comparisons: Vec<Comparison>,
    /// Values holding more than half of the original arm's labels.
    pub biased: Vec<BiasFlag>,
    pub quality_reference: f64,
    pub quality_reference_stderr: f64,
}

impl EvalReport {
    pub fn arm(&self, mode: Mode) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.mode == mode)
    }

    pub fn is_biased(&self, attribute: &str, value: &str) -> bool {
        self.biased.iter().any(|b| b.attribute == attribute && b.value == value)
    }
}

fn arm_report(arm: &ArmData, world: &ConceptWorld<f64>, condition: &str) -> Result<ArmReport> {
    if arm.samples.is_empty() {
        return Err(Error::validation(format!("{} arm has no samples", arm.mode)));
    }
    if arm.annotations.is_empty() {
        return Err(Error::validation(format!("{} arm has no annotations", arm.mode)));
    }
    let pooled: Vec<AnnotationRecord> = arm.annotations.iter().flatten().cloned().collect();
    let scheme = world.scheme();
    let mut ratio_tables = Vec::new();
    let mut fairness = BTreeMap::new();
    for attr in scheme.attributes() {
        let table = ratio_table(&pooled, &attr.name, scheme)?;
        fairness.insert(attr.name.clone(), normalized_kl_fairness(&table.counts(), attr.values.len())?);
        ratio_tables.push(table);
    }
    Ok(ArmReport {
        mode: arm.mode,
        n_samples: arm.samples.len(),
        ratio_tables,
        fairness,
        quality: quality_proxy(&arm.samples, world, condition)?,
    })
}

fn arm_comparisons(arm: &ArmData, world: &ConceptWorld<f64>) -> Result<Vec<Comparison>> {
    let scheme = world.scheme();
    let mut out = Vec::new();
    for attr in scheme.attributes() {
        for i in 0..arm.annotations.len() {
            for j in i + 1..arm.annotations.len() {
                let (a, b) = (&arm.annotations[i], &arm.annotations[j]);
                let id = |recs: &[AnnotationRecord]| {
                    recs.first().map(|r| r.annotator_id.clone()).unwrap_or_default()
                };
                let agreement = agreement_rate(a, b, &attr.name)?;
                let table = ContingencyTable::from_annotations(a, b, &attr.name, scheme)?;
                let chi2 = match chi_square_homogeneity(&table) {
                    Ok(c) => Some(c),
                    Err(Error::DegenerateTable(_)) => None,
                    Err(e) => return Err(e),
                };
                out.push(Comparison {
                    mode: arm.mode,
                    attribute: attr.name.clone(),
                    annotator_a: id(a),
                    annotator_b: id(b),
                    agreement,
                    chi2,
                    bonferroni_p: None,
                    significant: chi2.map(|c| c.p_value < ALPHA).unwrap_or(false),
                });
            }
        }
    }
    Ok(out)
}

/// Assembles ratio tables, fairness, quality and pairwise annotator comparisons for both arms.
pub fn build_report<R: Rng + ?Sized>(
    original: &ArmData,
    debiased: &ArmData,
    world: &ConceptWorld<f64>,
    prompt_condition: &str,
    reference_draws: usize,
    rng: &mut R,
) -> Result<EvalReport> {
    let arms = vec![
        arm_report(original, world, prompt_condition)?,
        arm_report(debiased, world, prompt_condition)?,
    ];
    let mut comparisons = arm_comparisons(original, world)?;
    comparisons.extend(arm_comparisons(debiased, world)?);
    let tests = comparisons.iter().filter(|c| c.chi2.is_some()).count().max(1) as f64;
    for c in &mut comparisons {
        c.bonferroni_p = c.chi2.map(|x| (x.p_value * tests).min(1.0));
    }
    let biased = arms[0]
        .ratio_tables
        .iter()
        .filter_map(|t| {
            t.majority().map(|row| BiasFlag {
                attribute: t.attribute.clone(),
                value: row.value.clone(),
                percentage: row.percentage,
            })
        })
        .collect();
    let (quality_reference, quality_reference_stderr) =
        quality_reference(world, prompt_condition, reference_draws, rng)?;
    Ok(EvalReport {
        world: world.name().to_string(),
        prompt_condition: prompt_condition.to_string(),
        arms,
        comparisons,
        biased,
        quality_reference,
        quality_reference_stderr,
    })
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::io(path, e)
}

/// One row per (mode, attribute, value).
pub fn write_ratio_csv(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["mode", "attribute", "value", "count", "percentage", "fairness", "biased"])
        .map_err(|e| csv_err(path, e))?;
    for arm in &report.arms {
        for t in &arm.ratio_tables {
            for row in &t.rows {
                w.write_record([
                    arm.mode.to_string(),
                    t.attribute.clone(),
                    row.value.clone(),
                    row.count.to_string(),
                    format!("{:.2}", row.percentage),
                    format!("{:.6}", arm.fairness[&t.attribute]),
                    report.is_biased(&t.attribute, &row.value).to_string(),
                ])
                .map_err(|e| csv_err(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| csv_err(path, e))
}

/// One row per annotator comparison: agreement, statistic, p-value.
pub fn write_comparisons_csv(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record([
        "mode",
        "attribute",
        "comparison",
        "agreement",
        "statistic",
        "dof",
        "p_value",
        "bonferroni_p",
        "significant",
    ])
    .map_err(|e| csv_err(path, e))?;
    for c in &report.comparisons {
        let (stat, dof, p) = match c.chi2 {
            Some(x) => (format!("{:.4}", x.statistic), x.dof.to_string(), format!("{:.6e}", x.p_value)),
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([
            c.mode.to_string(),
            c.attribute.clone(),
            c.label(),
            format!("{:.4}", c.agreement),
            stat,
            dof,
            p,
            c.bonferroni_p.map(|p| format!("{p:.6e}")).unwrap_or_default(),
            c.significant.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| csv_err(path, e))
}

pub fn write_report_json(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn summary_text(report: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "world: {}  prompt: {}", report.world, report.prompt_condition);
    for arm in &report.arms {
        let _ = writeln!(s, "\n[{}] {} samples, quality proxy {:.4}", arm.mode, arm.n_samples, arm.quality);
        for t in &arm.ratio_tables {
            let _ = writeln!(s, "  {} (fairness {:.4})", t.attribute, arm.fairness[&t.attribute]);
            for row in &t.rows {
                let mark = if report.is_biased(&t.attribute, &row.value) { " *" } else { "" };
                let _ = writeln!(s, "    {:<12} {:>6} {:>7.2}%{mark}", row.value, row.count, row.percentage);
            }
        }
    }
    let _ = writeln!(
        s,
        "\nquality reference {:.4} (se {:.4})",
        report.quality_reference, report.quality_reference_stderr
    );
    if !report.comparisons.is_empty() {
        let _ = writeln!(s, "\ncomparisons (* = p < {ALPHA}, uncorrected):");
        for c in &report.comparisons {
            let tail = match c.chi2 {
                Some(x) => format!(
                    "chi2 {:.2} dof {} p {:.3e}{}",
                    x.statistic,
                    x.dof,
                    x.p_value,
                    if c.significant { " *" } else { "" }
                ),
                None => "chi2 n/a (single category)".to_string(),
            };
            let _ = writeln!(
                s,
                "  {:<9} {:<10} {:<24} agreement {:>7.2}%  {tail}",
                c.mode.to_string(),
                c.attribute,
                c.label(),
                100.0 * c.agreement
            );
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::builtin_world;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rec(i: usize, who: &str, gender: &str) -> AnnotationRecord {
        let mut labels = BTreeMap::new();
        labels.insert("gender".to_string(), gender.to_string());
        AnnotationRecord { sample_index: i, annotator_id: who.into(), labels }
    }

    fn gender_list(who: &str, female: usize, male: usize) -> Vec<AnnotationRecord> {
        (0..female + male)
            .map(|i| rec(i, who, if i < female { "female" } else { "male" }))
            .collect()
    }

    fn cats(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn ratio_table_nurse_row() {
        let scheme = AttributeScheme::default();
        let t = ratio_table(&gender_list("e1", 398, 2), "gender", &scheme).unwrap();
        assert_eq!(t.percentage_of("female"), Some(99.5));
        assert_eq!(t.percentage_of("male"), Some(0.5));
        assert_eq!(t.rows[0].value, "male");
    }

    #[test]
    fn ratio_table_degenerate_and_uniform() {
        let scheme = AttributeScheme::default();
        let t = ratio_table(&gender_list("e1", 10, 0), "gender", &scheme).unwrap();
        assert_eq!(t.percentage_of("female"), Some(100.0));
        assert_eq!(t.rows[0].count, 0);
        let eth = ["black", "white", "asian", "indian"];
        let recs: Vec<_> = (0..400)
            .map(|i| {
                let mut labels = BTreeMap::new();
                labels.insert("ethnicity".to_string(), eth[i % 4].to_string());
                AnnotationRecord { sample_index: i, annotator_id: "a".into(), labels }
            })
            .collect();
        let t = ratio_table(&recs, "ethnicity", &scheme).unwrap();
        assert!(t.rows.iter().all(|r| r.percentage == 25.0));
        assert!(ratio_table(&[], "gender", &scheme).is_err());
        assert!(ratio_table(&[rec(0, "a", "robot")], "gender", &scheme).is_err());
    }

    #[test]
    fn agreement_examples() {
        let a = gender_list("a", 100, 99);
        assert_eq!(agreement_rate(&a, &a, "gender").unwrap(), 1.0);
        let flipped: Vec<_> = a
            .iter()
            .map(|r| rec(r.sample_index, "b", if r.labels["gender"] == "male" { "female" } else { "male" }))
            .collect();
        assert_eq!(agreement_rate(&a, &flipped, "gender").unwrap(), 0.0);
        let mut b = a.clone();
        b[0] = rec(0, "b", "male");
        b[1] = rec(1, "b", "male");
        let r = agreement_rate(&a, &b, "gender").unwrap();
        assert!((r - 197.0 / 199.0).abs() < 1e-15);
        assert!((100.0 * r - 98.99).abs() < 0.005);
        assert!(agreement_rate(&a, &b[..150], "gender").is_err());
    }

    #[test]
    fn chi_square_examples() {
        let t = ContingencyTable::new(cats(2), vec![10, 20], vec![10, 20]).unwrap();
        let c = chi_square_homogeneity(&t).unwrap();
        assert_eq!((c.statistic, c.dof, c.p_value), (0.0, 1, 1.0));

        let t = ContingencyTable::new(cats(2), vec![10, 20], vec![20, 10]).unwrap();
        let c = chi_square_homogeneity(&t).unwrap();
        assert!((c.statistic - 20.0 / 3.0).abs() < 1e-12);
        assert_eq!(c.dof, 1);
        assert!((c.p_value - 0.00982).abs() < 1e-5, "{}", c.p_value);
    }

    #[test]
    fn chi_square_drops_empty_columns() {
        let t = ContingencyTable::new(cats(4), vec![10, 0, 5, 0], vec![7, 0, 9, 0]).unwrap();
        assert_eq!(chi_square_homogeneity(&t).unwrap().dof, 1);
        let t = ContingencyTable::new(cats(3), vec![10, 0, 0], vec![7, 0, 0]).unwrap();
        assert!(matches!(chi_square_homogeneity(&t), Err(Error::DegenerateTable(_))));
        assert!(ContingencyTable::new(cats(2), vec![0, 0], vec![1, 1]).is_err());
        assert!(ContingencyTable::new(cats(1), vec![1], vec![1]).is_err());
    }

    #[test]
    fn chi_square_symmetry() {
        let t = ContingencyTable::new(cats(3), vec![33, 12, 5], vec![20, 25, 8]).unwrap();
        let a = chi_square_homogeneity(&t).unwrap();
        let b = chi_square_homogeneity(&t.swapped()).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-12);
        assert_eq!(a.dof, b.dof);
    }

    #[test]
    fn fairness_examples() {
        assert_eq!(normalized_kl_fairness(&[50, 50], 2).unwrap(), 1.0);
        assert_eq!(normalized_kl_fairness(&[7, 7, 7, 7], 4).unwrap(), 1.0);
        assert!(normalized_kl_fairness(&[10_000, 0], 2).unwrap() <= 0.01);
        // direct evaluation: p = (398.5, 2.5) / 401 against (1/2, 1/2)
        let f = normalized_kl_fairness(&[398, 2], 2).unwrap();
        assert!((f - 0.054_636_650_987_535_23).abs() < 1e-12, "{f}");
        let f = normalized_kl_fairness(&[52, 348], 2).unwrap();
        assert!((f - 0.559_963_255_725_202_4).abs() < 1e-12, "{f}");
        assert!(normalized_kl_fairness(&[5], 1).is_err());
        assert!(normalized_kl_fairness(&[0, 0], 2).is_err());
        assert!(normalized_kl_fairness(&[1, 2, 3], 2).is_err());
    }

    #[test]
    fn noisy_annotator_limits() {
        let world = builtin_world::<f64>("firefighter").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for c in world.components() {
            let clean = map_annotate(&c.mu, &world, "ethnicity").unwrap();
            assert_eq!(noisy_annotate(&c.mu, &world, "ethnicity", 0.0, &mut rng).unwrap(), clean);
            for _ in 0..20 {
                assert_ne!(noisy_annotate(&c.mu, &world, "ethnicity", 1.0, &mut rng).unwrap(), clean);
            }
        }
        assert!(noisy_annotate(&[0.0, 0.0], &world, "ethnicity", 1.5, &mut rng).is_err());
    }

    #[test]
    fn quality_proxy_closed_form_and_errors() {
        let world = builtin_world::<f64>("nurse").unwrap();
        assert!(quality_proxy::<f64>(&[], &world, "nurse").is_err());
        let far = vec![vec![1e3, 1e3]];
        let q = quality_proxy(&far, &world, "nurse").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (reference, _) = quality_reference(&world, "nurse", 2000, &mut rng).unwrap();
        assert!(q < reference - 1e4);
    }

    #[test]
    fn report_requires_both_arms() {
        let world = builtin_world::<f64>("nurse").unwrap();
        let empty = ArmData { mode: Mode::Debiased, samples: vec![], annotations: vec![] };
        let x = world.components()[0].mu.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ann = annotate_samples(std::slice::from_ref(&x), &world, &Annotator::new("a", 0.0), &mut rng).unwrap();
        let full = ArmData { mode: Mode::Original, samples: vec![x], annotations: vec![ann] };
        assert!(matches!(
            build_report(&full, &empty, &world, "nurse", 100, &mut rng),
            Err(Error::Validation(_))
        ));
    }
}
