//! Dataset-level benchmark harness.
//!
//! A manifest CSV binds each case to its image, ground truth, one prediction
//! per model and a lesion type:
//!
//! ```text
//! case_id,image,truth,model:deeplab:semantic,model:maskrcnn,lesion_type
//! ISIC_0000000,img/0.jpg,gt/0.png,pred_a/0.png,pred_b/0.png,naevus
//! ```
//!
//! Paths are relative to the manifest's directory. A `:semantic` suffix on a
//! model column marks a semantic-segmentation model whose predictions are
//! cleaned by [`crate::postprocess::clean`]; `:instance` (or no suffix)
//! leaves them untouched. A prediction path ending in `.csv` is an instance
//! sidecar, reduced to its most confident mask.
//!
//! Per case the harness loads the truth, loads and binarises each needed
//! prediction, resizes it (nearest-neighbour) to the scoring resolution,
//! cleans semantic predictions, fuses or selects, and scores. Reports average
//! the per-case scores overall and per lesion type.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{fuse, EnsembleStrategy};
use crate::error::{Error, Result};
use crate::ingest::{
    decode_probability_map, load_instance_set, select_highest_confidence,
    threshold_probability_map, ThresholdConfig,
};
use crate::metrics::{compute_metrics, confusion, ConfusionCounts, MetricSet};
use crate::postprocess::{clean, MorphologyConfig};
use crate::raster::{decode_mask, resize_mask, BinaryMask, DEFAULT_LESION_THRESHOLD};

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LesionType {
    Naevus,
    Melanoma,
    SeborrhoeicKeratosis,
    Unknown,
}

impl LesionType {
    /// Types that get their own row in reports, in table order.
    pub const REPORTED: [LesionType; 3] = [
        LesionType::Naevus,
        LesionType::Melanoma,
        LesionType::SeborrhoeicKeratosis,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LesionType::Naevus => "naevus",
            LesionType::Melanoma => "melanoma",
            LesionType::SeborrhoeicKeratosis => "seborrhoeic_keratosis",
            LesionType::Unknown => "unknown",
        }
    }

    fn heading(self) -> &'static str {
        match self {
            LesionType::Naevus => "Naevus",
            LesionType::Melanoma => "Melanoma",
            LesionType::SeborrhoeicKeratosis => "SK",
            LesionType::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for LesionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LesionType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace([' ', '-'], "_")
            .as_str()
        {
            "naevus" | "nevus" => Ok(LesionType::Naevus),
            "melanoma" => Ok(LesionType::Melanoma),
            "seborrhoeic_keratosis" | "seborrheic_keratosis" | "sk" => {
                Ok(LesionType::SeborrhoeicKeratosis)
            }
            "unknown" | "" => Ok(LesionType::Unknown),
            _ => Err(Error::UnknownLesionType(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub name: String,
    /// Apply morphological clean-up to this model's predictions.
    pub postprocess: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseRecord {
    pub case_id: String,
    pub image: PathBuf,
    pub truth: PathBuf,
    /// One prediction path per model, in manifest column order.
    pub predictions: Vec<PathBuf>,
    pub lesion_type: LesionType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub models: Vec<ModelSpec>,
    pub records: Vec<CaseRecord>,
}

impl DatasetManifest {
    pub fn model_index(&self, name: &str) -> Result<usize> {
        self.models
            .iter()
            .position(|m| m.name == name)
            .ok_or_else(|| Error::UnknownModel(name.to_owned()))
    }
}

fn parse_model_column(header: &str) -> Option<ModelSpec> {
    let rest = header.strip_prefix("model:")?;
    let (name, postprocess) = match rest.rsplit_once(':') {
        Some((name, "semantic")) => (name, true),
        Some((name, "instance")) => (name, false),
        _ => (rest, false),
    };
    Some(ModelSpec {
        name: name.to_owned(),
        postprocess,
    })
}

/// Load and validate a manifest CSV.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")), name)
}

/// Parse manifest CSV text; relative paths are resolved against `base`.
pub fn parse_manifest(text: &[u8], base: &Path, name: String) -> Result<DatasetManifest> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    };
    let id_col = col("case_id")?;
    let image_col = col("image")?;
    let truth_col = col("truth")?;
    let type_col = col("lesion_type")?;
    let (model_cols, models): (Vec<usize>, Vec<ModelSpec>) = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| parse_model_column(h).map(|m| (i, m)))
        .unzip();
    if models.is_empty() {
        return Err(Error::MissingColumn("model:<name>".to_owned()));
    }

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let case_id = row[id_col].to_owned();
        if !seen.insert(case_id.clone()) {
            return Err(Error::DuplicateCaseId(case_id));
        }
        records.push(CaseRecord {
            image: base.join(&row[image_col]),
            truth: base.join(&row[truth_col]),
            predictions: model_cols.iter().map(|&c| base.join(&row[c])).collect(),
            lesion_type: row[type_col].parse()?,
            case_id,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyManifest);
    }
    Ok(DatasetManifest {
        name,
        models,
        records,
    })
}

/// What the harness scores: a fused ensemble or one model on its own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    Ensemble(EnsembleStrategy),
    Single(String),
}

impl Selector {
    pub fn label(&self) -> String {
        match self {
            Selector::Ensemble(s) => s.label().to_owned(),
            Selector::Single(name) => name.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoringResolution {
    /// Score at the ground truth's native size.
    #[default]
    Truth,
    /// Resize truth and predictions (nearest-neighbour) to a fixed size.
    Fixed(u32, u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    /// Mean of per-image scores.
    #[default]
    PerImage,
    /// Scores of the confusion counts summed over all pixels of all images.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalConfig {
    pub threshold: ThresholdConfig,
    pub morphology: MorphologyConfig,
    pub resolution: ScoringResolution,
    pub aggregation: AggregationMode,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn load_prediction(path: &Path, target: (u32, u32), cfg: &EvalConfig) -> Result<BinaryMask> {
    let is_sidecar = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let mask = if is_sidecar {
        select_highest_confidence(&load_instance_set(path)?, target)?
    } else {
        threshold_probability_map(&decode_probability_map(&read(path)?)?, &cfg.threshold)
    };
    resize_mask(&mask, target.0, target.1)
}

/// Final prediction and the truth it is scored against, both at scoring resolution.
pub fn case_masks(
    record: &CaseRecord,
    models: &[ModelSpec],
    selector: &Selector,
    cfg: &EvalConfig,
) -> Result<(BinaryMask, BinaryMask)> {
    let run = || -> Result<(BinaryMask, BinaryMask)> {
        if !record.image.exists() {
            return Err(Error::io(
                &record.image,
                std::io::Error::new(std::io::ErrorKind::NotFound, "image not found"),
            ));
        }
        let mut truth = decode_mask(&read(&record.truth)?, DEFAULT_LESION_THRESHOLD)?;
        if let ScoringResolution::Fixed(w, h) = cfg.resolution {
            truth = resize_mask(&truth, w, h)?;
        }
        let target = truth.dimensions();
        let predict = |i: usize| -> Result<BinaryMask> {
            let mask = load_prediction(&record.predictions[i], target, cfg)?;
            Ok(if models[i].postprocess {
                clean(&mask, &cfg.morphology)
            } else {
                mask
            })
        };
        let pred = match selector {
            Selector::Single(name) => {
                let i = models
                    .iter()
                    .position(|m| &m.name == name)
                    .ok_or_else(|| Error::UnknownModel(name.clone()))?;
                predict(i)?
            }
            Selector::Ensemble(strategy) => {
                if models.len() != 2 {
                    return Err(Error::ModelCount(models.len()));
                }
                fuse(&predict(0)?, &predict(1)?, *strategy)?
            }
        };
        Ok((pred, truth))
    };
    run().map_err(|e| e.in_case(&record.case_id))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: String,
    pub lesion_type: LesionType,
    pub counts: ConfusionCounts,
    pub metrics: MetricSet,
}

pub fn evaluate_case(
    record: &CaseRecord,
    models: &[ModelSpec],
    selector: &Selector,
    cfg: &EvalConfig,
) -> Result<CaseResult> {
    let (pred, truth) = case_masks(record, models, selector, cfg)?;
    let counts = confusion(&pred, &truth).map_err(|e| e.in_case(&record.case_id))?;
    let metrics = compute_metrics(&counts).map_err(|e| e.in_case(&record.case_id))?;
    Ok(CaseResult {
        case_id: record.case_id.clone(),
        lesion_type: record.lesion_type,
        counts,
        metrics,
    })
}

/// Evaluate every case on a pool of `workers` threads (0 = one per logical
/// core). Results come back sorted by case id, failures included.
pub fn evaluate_cases(
    manifest: &DatasetManifest,
    selector: &Selector,
    cfg: &EvalConfig,
    workers: usize,
) -> Result<Vec<Result<CaseResult>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    let mut results: Vec<(String, Result<CaseResult>)> = pool.install(|| {
        manifest
            .records
            .par_iter()
            .map(|r| {
                (
                    r.case_id.clone(),
                    evaluate_case(r, &manifest.models, selector, cfg),
                )
            })
            .collect()
    });
    results.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(results.into_iter().map(|(_, r)| r).collect())
}

/// Evaluate a whole manifest and aggregate. All case failures are returned
/// together as [`Error::Cases`].
pub fn evaluate_manifest(
    manifest: &DatasetManifest,
    selector: &Selector,
    cfg: &EvalConfig,
    workers: usize,
) -> Result<AggregateReport> {
    let (ok, failed): (Vec<_>, Vec<_>) = evaluate_cases(manifest, selector, cfg, workers)?
        .into_iter()
        .partition(|r| r.is_ok());
    if !failed.is_empty() {
        return Err(Error::Cases(
            failed.into_iter().filter_map(|r| r.err()).collect(),
        ));
    }
    let mut report = aggregate(
        ok.into_iter().map(|r| r.expect("partitioned")).collect(),
        &selector.label(),
        cfg.aggregation,
    )?;
    report.dataset = manifest.name.clone();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeSummary {
    pub lesion_type: LesionType,
    pub cases: usize,
    pub metrics: MetricSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub schema_version: u32,
    pub label: String,
    pub dataset: String,
    pub aggregation: AggregationMode,
    pub case_count: usize,
    pub overall: MetricSet,
    /// Reported lesion types that have at least one case, in table order.
    pub per_type: Vec<TypeSummary>,
    pub cases: Vec<CaseResult>,
}

fn summarise(cases: &[&CaseResult], mode: AggregationMode) -> Result<MetricSet> {
    match mode {
        AggregationMode::PerImage => {
            MetricSet::mean(cases.iter().map(|c| &c.metrics)).ok_or(Error::EmptyInput)
        }
        AggregationMode::Pooled => {
            let total = cases
                .iter()
                .fold(ConfusionCounts::default(), |acc, c| acc + c.counts);
            compute_metrics(&total)
        }
    }
}

/// Average per-case scores overall and per lesion type. Cases are sorted by
/// id first so the result does not depend on input order. `unknown` cases
/// count towards the overall row only.
pub fn aggregate(
    mut per_case: Vec<CaseResult>,
    label: &str,
    mode: AggregationMode,
) -> Result<AggregateReport> {
    if per_case.is_empty() {
        return Err(Error::EmptyInput);
    }
    per_case.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    let all: Vec<&CaseResult> = per_case.iter().collect();
    let overall = summarise(&all, mode)?;
    let mut per_type = Vec::new();
    for ty in LesionType::REPORTED {
        let subset: Vec<&CaseResult> = per_case.iter().filter(|c| c.lesion_type == ty).collect();
        if !subset.is_empty() {
            per_type.push(TypeSummary {
                lesion_type: ty,
                cases: subset.len(),
                metrics: summarise(&subset, mode)?,
            });
        }
    }
    Ok(AggregateReport {
        schema_version: SCHEMA_VERSION,
        label: label.to_owned(),
        dataset: String::new(),
        aggregation: mode,
        case_count: per_case.len(),
        overall,
        per_type,
        cases: per_case,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(Error::InvalidParameter(format!(
                "unknown report format `{s}` (expected json, csv or markdown)"
            ))),
        }
    }
}

pub fn render_report(report: &AggregateReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("report serialises");
            out.push(b'\n');
            out
        }
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Markdown => render_markdown(report).into_bytes(),
    }
}

/// Parse a report previously rendered as JSON.
pub fn parse_report(json: &[u8]) -> Result<AggregateReport> {
    let report: AggregateReport =
        serde_json::from_slice(json).map_err(|e| Error::Report(e.to_string()))?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(Error::Report(format!(
            "unsupported schema_version {}",
            report.schema_version
        )));
    }
    Ok(report)
}

fn render_csv(report: &AggregateReport) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "scope",
        "name",
        "cases",
        "accuracy",
        "dice",
        "jsi",
        "sensitivity",
        "specificity",
        "mcc",
    ];
    w.write_record(header).expect("in-memory write");
    let mut row = |scope: &str, name: &str, cases: usize, m: &MetricSet| {
        let mut fields = vec![scope.to_owned(), name.to_owned(), cases.to_string()];
        fields.extend(
            [
                m.accuracy,
                m.dice,
                m.jsi,
                m.sensitivity,
                m.specificity,
                m.mcc,
            ]
            .iter()
            .map(f64::to_string),
        );
        w.write_record(&fields).expect("in-memory write");
    };
    row("overall", &report.label, report.case_count, &report.overall);
    for t in &report.per_type {
        row("lesion_type", t.lesion_type.as_str(), t.cases, &t.metrics);
    }
    for c in &report.cases {
        row("case", &c.case_id, 1, &c.metrics);
    }
    w.into_inner().expect("in-memory flush")
}

type Column = (&'static str, fn(&MetricSet) -> f64);

fn render_markdown(report: &AggregateReport) -> String {
    use std::fmt::Write;

    let mut out = String::new();
    let m = &report.overall;
    let _ = writeln!(out, "## {} ({} cases)\n", report.label, report.case_count);
    out.push_str("| Method | Accuracy | Dice | Jaccard Index | Sensitivity | Specificity |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    let _ = writeln!(
        out,
        "| {} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} |",
        report.label, m.accuracy, m.dice, m.jsi, m.sensitivity, m.specificity
    );

    if report.per_type.is_empty() {
        return out;
    }
    let groups: [(&str, [Column; 3]); 2] = [
        (
            "SEN / SPE / ACC",
            [
                ("SEN", |m| m.sensitivity),
                ("SPE", |m| m.specificity),
                ("ACC", |m| m.accuracy),
            ],
        ),
        (
            "DIC / JSI / MCC",
            [("DIC", |m| m.dice), ("JSI", |m| m.jsi), ("MCC", |m| m.mcc)],
        ),
    ];
    let scopes: Vec<(&str, &MetricSet)> = report
        .per_type
        .iter()
        .map(|t| (t.lesion_type.heading(), &t.metrics))
        .chain(std::iter::once(("Overall", &report.overall)))
        .collect();
    for (title, columns) in groups {
        let _ = write!(out, "\n### Per lesion type, {title} (%)\n\n| Method |");
        for (scope, _) in &scopes {
            for (col, _) in &columns {
                let _ = write!(out, " {scope} {col} |");
            }
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(scopes.len() * columns.len()));
        let _ = write!(out, "\n| {} |", report.label);
        for (_, metrics) in &scopes {
            for (_, get) in &columns {
                let _ = write!(out, " {:.2} |", 100.0 * get(metrics));
            }
        }
        out.push('\n');
    }
    if report
        .per_type
        .iter()
        .any(|t| t.lesion_type == LesionType::SeborrhoeicKeratosis)
    {
        out.push_str("\nSK denotes seborrhoeic keratosis.\n");
    }
    out
}
