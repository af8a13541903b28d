//! Experiment orchestration: strict JSON configs, multi-seed runs with
//! mean ± sample-std aggregation, table rendering, and grid execution.
//!
//! Reports are deterministic for a fixed `(config, base_seed)`: the only
//! fields that vary between identical runs are the wall-time metadata.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::AugmenterSpec;
use crate::error::{Error, Result};
use crate::graph::{DatasetStats, Graph};
use crate::io::{load_graph, GraphFormat};
use crate::models::train::{evaluate, train_supervised, TrainConfig, TrainOutcome};
use crate::models::{Arch, ModelConfig};
use crate::synthetic::SbmParams;

pub const METRIC_ESTIMATOR: &str = "sample_std_n_minus_1";
pub const AUGMENTATION_PROTOCOL: &str = "per_epoch_resample";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSpec {
    File {
        path: PathBuf,
        #[serde(default)]
        format: GraphFormat,
    },
    Synthetic(SbmParams),
}

impl DatasetSpec {
    pub fn name(&self) -> String {
        match self {
            DatasetSpec::File { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
            DatasetSpec::Synthetic(p) => format!("sbm_n{}_c{}", p.n, p.classes),
        }
    }

    /// Loads or generates the graph; file warnings are returned alongside.
    pub fn realize(&self) -> Result<(Graph, Vec<String>)> {
        match self {
            DatasetSpec::File { path, format } => {
                let loaded = load_graph(path, *format)?;
                Ok((loaded.graph, loaded.warnings))
            }
            DatasetSpec::Synthetic(params) => Ok((params.generate()?, Vec::new())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub model: ModelConfig,
    #[serde(default = "default_augmentation")]
    pub augmentation: AugmenterSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_num_seeds")]
    pub num_seeds: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Optional published statistics to cross-check the loaded dataset
    /// against; mismatches are warnings.
    #[serde(default)]
    pub expected_stats: Option<DatasetStats>,
}

fn default_augmentation() -> AugmenterSpec {
    AugmenterSpec::Identity
}

fn default_num_seeds() -> usize {
    10
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_seeds == 0 {
            return Err(Error::Config("num_seeds must be at least 1".into()));
        }
        self.augmentation
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if !self.model.layer_dims.is_empty() {
            self.model.validate()?;
        }
        Ok(())
    }

    /// Fills inferred fields (layer dims from the dataset) so the effective
    /// config echoed into reports is complete.
    pub fn resolve_model(&self, g: &Graph) -> Result<ModelConfig> {
        let classes = g.stats().classes.max(1);
        let mut model = self.model.clone();
        if model.layer_dims.is_empty() {
            model.layer_dims = ModelConfig::defaults_for(model.arch, g.feature_dim(), classes)
                .layer_dims;
        }
        model.validate()?;
        Ok(model)
    }
}

/// Strict config parse: unknown keys are rejected with serde's key context.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedResult {
    pub seed: u64,
    /// Test accuracy in percent at the best-validation checkpoint.
    pub test_accuracy: Option<f64>,
    pub test_macro_f1: Option<f64>,
    pub best_val_accuracy: Option<f64>,
    pub best_epoch: Option<usize>,
    pub epochs_run: Option<usize>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportMetadata {
    pub config_hash: String,
    pub estimator: String,
    pub augmentation_protocol: String,
    pub package_version: String,
    pub effective_config: ExperimentConfig,
    pub dataset_warnings: Vec<String>,
    /// Excluded from determinism comparisons.
    pub wall_time_secs: f64,
}

/// Per-cell experiment outcome: raw per-seed samples plus their
/// aggregation, in percent, formatted downstream as `MM.MM±S.SS`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentReport {
    pub model_name: String,
    pub method_name: String,
    pub dataset_name: String,
    pub samples: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub partial: bool,
    pub per_seed: Vec<SeedResult>,
    pub metadata: ReportMetadata,
}

/// Two-pass mean and sample standard deviation (n − 1); zero std for a
/// single sample by definition.
pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    if samples.is_empty() {
        return (0.0, 0.0);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// FNV-1a over the canonical config JSON; stable across runs and platforms.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in canonical.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

pub fn arch_name(arch: Arch) -> &'static str {
    match arch {
        Arch::Gcn => "GCN",
        Arch::GraphSage => "GSAGE",
        Arch::Gat => "GAT",
        Arch::Gin => "GIN",
    }
}

pub fn method_name(aug: &AugmenterSpec) -> &'static str {
    match aug {
        AugmenterSpec::Identity => "I",
        AugmenterSpec::EdgeRemove { .. } => "ER",
        AugmenterSpec::FeatureMask { .. } => "FM",
        AugmenterSpec::NodeDrop { .. } => "ND",
        AugmenterSpec::RandomWalkSample { .. } => "RWS",
        AugmenterSpec::Fdm { .. } => "FDM",
        AugmenterSpec::Fana { .. } => "FANA",
    }
}

/// Runs `train_supervised` for seeds `base_seed .. base_seed + num_seeds`,
/// evaluates test accuracy at each best-validation checkpoint, and
/// aggregates. Seeds run in parallel; aggregation order is by seed, so the
/// report is schedule-independent.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with_artifacts(cfg, None)
}

/// `run_experiment` plus on-disk artifacts: per-seed metric trace CSVs and
/// the first seed's best-model checkpoint.
pub fn run_experiment_with_artifacts(
    cfg: &ExperimentConfig,
    artifact_dir: Option<&Path>,
) -> Result<ExperimentReport> {
    let start = std::time::Instant::now();
    cfg.validate()?;
    let (graph, mut warnings) = cfg.dataset.realize()?;
    if let Some(expected) = &cfg.expected_stats {
        if let Some(diff) = graph.stats().mismatch(expected) {
            warnings.push(format!("dataset statistics mismatch: {diff}"));
        }
    }
    let model = cfg.resolve_model(&graph)?;
    let mut effective = cfg.clone();
    effective.model = model.clone();

    let seeds: Vec<u64> = (0..cfg.num_seeds as u64).map(|i| cfg.base_seed + i).collect();
    let results: Vec<(SeedResult, Option<TrainOutcome>)> = seeds
        .par_iter()
        .map(|&seed| run_one_seed(&graph, &model, &cfg.train, &cfg.augmentation, seed))
        .collect();

    if let Some(dir) = artifact_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        for (result, outcome) in &results {
            let Some(outcome) = outcome else { continue };
            crate::models::train::write_trace_csv(
                &outcome.trace,
                dir.join(format!("trace_seed_{}.csv", result.seed)),
            )?;
            if result.seed == cfg.base_seed {
                crate::models::train::save_model(
                    &outcome.model,
                    dir.join(format!("model_seed_{}.json", result.seed)),
                )?;
            }
        }
    }
    let per_seed: Vec<SeedResult> = results.into_iter().map(|(r, _)| r).collect();

    let samples: Vec<f64> = per_seed.iter().filter_map(|r| r.test_accuracy).collect();
    let (mean, std) = mean_std(&samples);
    let partial = per_seed.iter().any(|r| r.error.is_some());

    Ok(ExperimentReport {
        model_name: arch_name(model.arch).to_string(),
        method_name: method_name(&cfg.augmentation).to_string(),
        dataset_name: cfg.dataset.name(),
        samples,
        mean,
        std,
        partial,
        per_seed,
        metadata: ReportMetadata {
            config_hash: config_hash(&effective),
            estimator: METRIC_ESTIMATOR.to_string(),
            augmentation_protocol: AUGMENTATION_PROTOCOL.to_string(),
            package_version: env!("CARGO_PKG_VERSION").to_string(),
            effective_config: effective,
            dataset_warnings: warnings,
            wall_time_secs: start.elapsed().as_secs_f64(),
        },
    })
}

fn run_one_seed(
    graph: &Graph,
    model: &ModelConfig,
    train: &TrainConfig,
    aug: &AugmenterSpec,
    seed: u64,
) -> (SeedResult, Option<TrainOutcome>) {
    let outcome: Result<(TrainOutcome, f64, f64)> = (|| {
        let out = train_supervised(graph, model, train, aug, seed)?;
        let test_mask = graph
            .test_mask()
            .ok_or_else(|| Error::Validation("dataset has no test mask".into()))?;
        let metrics = evaluate(&out.model, graph, test_mask)?;
        Ok((out, metrics.accuracy, metrics.macro_f1))
    })();
    match outcome {
        Ok((out, acc, f1)) => (
            SeedResult {
                seed,
                test_accuracy: Some(acc * 100.0),
                test_macro_f1: Some(f1 * 100.0),
                best_val_accuracy: Some(out.best_val_acc * 100.0),
                best_epoch: Some(out.best_epoch),
                epochs_run: Some(out.trace.len()),
                error: None,
            },
            Some(out),
        ),
        Err(e) => (
            SeedResult {
                seed,
                test_accuracy: None,
                test_macro_f1: None,
                best_val_accuracy: None,
                best_epoch: None,
                epochs_run: None,
                error: Some(e.to_string()),
            },
            None,
        ),
    }
}

pub fn save_report(report: &ExperimentReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_report(path: impl AsRef<Path>) -> Result<ExperimentReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
#[clap(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Markdown,
    Json,
}

pub fn format_cell(mean: f64, std: f64) -> String {
    format!("{mean:.2}±{std:.2}")
}

/// Renders reports as a grid: one row per (model, method), one column per
/// dataset, cells `MM.MM±S.SS`, and a side column flagging the top-2 means
/// per dataset column. JSON output keeps the full-precision reports.
pub fn emit_table(reports: &[ExperimentReport], format: TableFormat) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::Validation("no reports to tabulate".into()));
    }
    if format == TableFormat::Json {
        let mut text = serde_json::to_string_pretty(reports).expect("reports serialize");
        text.push('\n');
        return Ok(text);
    }

    // Row and column orders follow first appearance.
    let mut rows: Vec<(String, String)> = Vec::new();
    let mut cols: Vec<String> = Vec::new();
    for r in reports {
        let row_key = (r.model_name.clone(), r.method_name.clone());
        if !rows.contains(&row_key) {
            rows.push(row_key);
        }
        if !cols.contains(&r.dataset_name) {
            cols.push(r.dataset_name.clone());
        }
    }
    let lookup = |row: &(String, String), col: &String| {
        reports.iter().find(|r| {
            r.model_name == row.0 && r.method_name == row.1 && &r.dataset_name == col
        })
    };

    // Top-2 means per dataset column; ties resolve to earlier rows.
    let mut top2: Vec<Vec<&(String, String)>> = Vec::new();
    for col in &cols {
        let mut ranked: Vec<(&(String, String), f64)> = rows
            .iter()
            .filter_map(|row| lookup(row, col).map(|r| (row, r.mean)))
            .collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        top2.push(ranked.into_iter().take(2).map(|(row, _)| row).collect());
    }
    let flags_for = |row: &(String, String)| -> String {
        let hits: Vec<&str> = cols
            .iter()
            .enumerate()
            .filter(|(ci, _)| top2[*ci].contains(&row))
            .map(|(_, c)| c.as_str())
            .collect();
        if hits.is_empty() {
            "-".to_string()
        } else {
            hits.join(" ")
        }
    };

    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str("model,method");
            for c in &cols {
                out.push_str(&format!(",{c}"));
            }
            out.push_str(",top2\n");
            for row in &rows {
                out.push_str(&format!("{},{}", row.0, row.1));
                for c in &cols {
                    let cell = lookup(row, c)
                        .map(|r| format_cell(r.mean, r.std))
                        .unwrap_or_default();
                    out.push_str(&format!(",{cell}"));
                }
                out.push_str(&format!(",{}\n", flags_for(row)));
            }
        }
        TableFormat::Markdown => {
            out.push_str("| Model | Method |");
            for c in &cols {
                out.push_str(&format!(" {c} |"));
            }
            out.push_str(" Top-2 |\n");
            out.push_str("|---|---|");
            for _ in &cols {
                out.push_str("---|");
            }
            out.push_str("---|\n");
            for row in &rows {
                out.push_str(&format!("| {} | {} |", row.0, row.1));
                for c in &cols {
                    let cell = lookup(row, c)
                        .map(|r| format_cell(r.mean, r.std))
                        .unwrap_or_default();
                    out.push_str(&format!(" {cell} |"));
                }
                out.push_str(&format!(" {} |\n", flags_for(row)));
            }
        }
        TableFormat::Json => unreachable!(),
    }
    Ok(out)
}

/// Grid description: every (model, augmentation, dataset) cell runs
/// `run_experiment` with the shared base seed, so the Identity column is a
/// controlled baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub models: Vec<ModelConfig>,
    pub augmentations: Vec<AugmenterSpec>,
    pub datasets: Vec<DatasetSpec>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_num_seeds")]
    pub num_seeds: usize,
    #[serde(default)]
    pub base_seed: u64,
}

pub fn parse_grid(path: impl AsRef<Path>) -> Result<GridSpec> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let grid: GridSpec = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if grid.models.is_empty() || grid.augmentations.is_empty() || grid.datasets.is_empty() {
        return Err(Error::Config("grid axes must all be nonempty".into()));
    }
    Ok(grid)
}

/// Cartesian-product execution. Returns all reports plus a flag indicating
/// whether any cell was partial or failed outright.
pub fn benchmark_grid(grid: &GridSpec) -> (Vec<ExperimentReport>, bool) {
    let mut reports = Vec::new();
    let mut any_partial = false;
    for dataset in &grid.datasets {
        for model in &grid.models {
            for aug in &grid.augmentations {
                let cfg = ExperimentConfig {
                    dataset: dataset.clone(),
                    model: model.clone(),
                    augmentation: aug.clone(),
                    train: grid.train,
                    num_seeds: grid.num_seeds,
                    base_seed: grid.base_seed,
                    expected_stats: None,
                };
                match run_experiment(&cfg) {
                    Ok(report) => {
                        any_partial |= report.partial;
                        reports.push(report);
                    }
                    Err(e) => {
                        any_partial = true;
                        reports.push(failed_cell_report(&cfg, e.to_string()));
                    }
                }
            }
        }
    }
    (reports, any_partial)
}

fn failed_cell_report(cfg: &ExperimentConfig, error: String) -> ExperimentReport {
    ExperimentReport {
        model_name: arch_name(cfg.model.arch).to_string(),
        method_name: method_name(&cfg.augmentation).to_string(),
        dataset_name: cfg.dataset.name(),
        samples: Vec::new(),
        mean: 0.0,
        std: 0.0,
        partial: true,
        per_seed: vec![SeedResult {
            seed: cfg.base_seed,
            test_accuracy: None,
            test_macro_f1: None,
            best_val_accuracy: None,
            best_epoch: None,
            epochs_run: None,
            error: Some(error),
        }],
        metadata: ReportMetadata {
            config_hash: config_hash(cfg),
            estimator: METRIC_ESTIMATOR.to_string(),
            augmentation_protocol: AUGMENTATION_PROTOCOL.to_string(),
            package_version: env!("CARGO_PKG_VERSION").to_string(),
            effective_config: cfg.clone(),
            dataset_warnings: Vec::new(),
            wall_time_secs: 0.0,
        },
    }
}
