//! Configuration-driven experiment runner and artifact writer.
//!
//! A run simulates (or loads) CSI, fits PCA, calibrates the presence
//! detector and, when occupied samples exist, evaluates the crowd-size
//! classifier over the configured splits. Every number in the report is
//! also written to a CSV or JSON file in the output directory.

pub mod dataset_io;
pub mod plots;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::dataset::{CsiDataset, DatasetError};
use crate::detector::{
    calibrate, consistency_report, occupancy_labels, sweep_threshold, threshold_grid, ConsistencyReport,
    DetectorCalibration, DetectorError, ThresholdSweep, DEFAULT_CONSISTENCY_BOUND_PP, DEFAULT_GRID_STEP,
};
use crate::estimator::{accuracy_grid, EstimatorError, GridRow, Split, PAPER_SPLITS};
use crate::features::{fit_pca, normalize_pc1, FeatureError, PcaModel, DEFAULT_K};
use crate::lte_phy::{extract_csi, CellConfig, PhyError};
use crate::scenario_sim::{synth_csi_dataset, synth_iq, Motion, ScenarioConfig, SimError};

pub use dataset_io::{load_dataset, save_dataset, DatasetIoError};

/// Pipeline stage named in errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Simulate,
    Extract,
    Features,
    Detector,
    Estimator,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Simulate => "simulate",
            Stage::Extract => "extract",
            Stage::Features => "features",
            Stage::Detector => "detector",
            Stage::Estimator => "estimator",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    DatasetIo(#[from] DatasetIoError),
    #[error("{stage} stage: {source}")]
    Stage { stage: Stage, source: StageError },
}

impl HarnessError {
    /// 2 for bad inputs, 3 for failures inside the pipeline.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Stage { .. } => 3,
            _ => 2,
        }
    }
}

fn stage<E: Into<StageError>>(stage: Stage) -> impl FnOnce(E) -> HarnessError {
    move |e| HarnessError::Stage { stage, source: e.into() }
}

/// How CSI vectors are produced from the simulated scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsiSource {
    /// Channel magnitude plus estimation noise, no waveform.
    #[default]
    Direct,
    /// Full IQ synthesis followed by the receiver chain.
    Iq,
}

fn default_pca_k() -> usize {
    DEFAULT_K
}
fn default_step() -> f64 {
    DEFAULT_GRID_STEP
}
fn default_splits() -> Vec<Split> {
    PAPER_SPLITS.to_vec()
}
fn default_neighbors() -> usize {
    1
}
fn default_bound() -> f64 {
    DEFAULT_CONSISTENCY_BOUND_PP
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Simulated scene. Defaults apply when neither this nor `dataset` is set.
    #[serde(default)]
    pub scenario: Option<ScenarioConfig>,
    /// Pre-computed CSID dataset instead of simulation.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    /// Run once per listed motion mode; defaults to the scenario's own.
    #[serde(default)]
    pub motions: Option<Vec<Motion>>,
    /// Run once per day id; defaults to the scenario's own.
    #[serde(default)]
    pub day_ids: Option<Vec<u32>>,
    #[serde(default)]
    pub cell: CellConfig,
    #[serde(default)]
    pub csi_source: CsiSource,
    #[serde(default = "default_pca_k")]
    pub pca_k: usize,
    #[serde(default = "default_step")]
    pub threshold_step: f64,
    #[serde(default = "default_splits")]
    pub splits: Vec<Split>,
    #[serde(default = "default_neighbors")]
    pub knn_neighbors: usize,
    #[serde(default = "default_bound")]
    pub consistency_bound_pp: f64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_true")]
    pub emit_plots: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: None,
            dataset: None,
            motions: None,
            day_ids: None,
            cell: CellConfig::default(),
            csi_source: CsiSource::Direct,
            pca_k: DEFAULT_K,
            threshold_step: DEFAULT_GRID_STEP,
            splits: default_splits(),
            knn_neighbors: 1,
            consistency_bound_pp: DEFAULT_CONSISTENCY_BOUND_PP,
            output_dir: default_output(),
            emit_plots: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: path.into(), source })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.into()));
        if self.scenario.is_some() && self.dataset.is_some() {
            return bad("set either scenario or dataset, not both");
        }
        if let Some(p) = &self.dataset {
            if !p.exists() {
                return Err(HarnessError::Config(format!("dataset {} does not exist", p.display())));
            }
            if self.motions.is_some() || self.day_ids.is_some() {
                return bad("motions and day_ids apply to simulated scenarios only");
            }
            if self.csi_source == CsiSource::Iq {
                return bad("csi_source = iq needs a simulated scenario");
            }
        }
        if let Some(s) = &self.scenario {
            s.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        self.cell.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if matches!(&self.motions, Some(m) if m.is_empty()) || matches!(&self.day_ids, Some(d) if d.is_empty()) {
            return bad("motions and day_ids must be nonempty when given");
        }
        if let Some(d) = &self.day_ids {
            if (1..d.len()).any(|i| d[..i].contains(&d[i])) {
                return bad("day_ids must be distinct");
            }
        }
        if self.pca_k == 0 {
            return bad("pca_k must be positive");
        }
        threshold_grid(self.threshold_step).map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.splits.iter().any(|s| s.train == 0 || s.test == 0) {
            return bad("split counts must be positive");
        }
        if self.knn_neighbors == 0 {
            return bad("knn_neighbors must be positive");
        }
        if !(self.consistency_bound_pp >= 0.0) {
            return bad("consistency_bound_pp must be non-negative");
        }
        Ok(())
    }

    pub fn scenario(&self) -> ScenarioConfig {
        self.scenario.clone().unwrap_or_default()
    }
}

/// PCA basis with PC1 normalization and the detector calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub pca: PcaModel,
    pub calibration: DetectorCalibration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub train: usize,
    pub test: usize,
    pub accuracy: f64,
    pub correct: u64,
    pub total: u64,
    pub confusion_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tag: String,
    pub motion: Option<Motion>,
    pub day_id: Option<u32>,
    pub detector_rows: usize,
    pub estimator_rows: usize,
    pub eigenvalues: Vec<f64>,
    pub calibration: DetectorCalibration,
    pub sweep: ThresholdSweep,
    pub model_file: String,
    pub sweep_file: String,
    pub scores_file: String,
    /// Empty when the estimator stage did not run.
    pub splits: Vec<SplitResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayComparison {
    pub motion: Option<Motion>,
    pub report: ConsistencyReport,
}

/// Only reproducible fields: no timestamps, host names or thread counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub crate_version: String,
    pub csi_source: CsiSource,
    pub simulated_snapshots_per_category: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub metadata: Metadata,
    pub config: ExperimentConfig,
    pub runs: Vec<RunReport>,
    pub consistency: Vec<DayComparison>,
    pub accuracy_grid_file: Option<String>,
    /// Relative names of every file written, including plots.
    pub artifacts: Vec<String>,
}

impl ExperimentReport {
    /// Human-readable digest; every figure also appears in `report.json`.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for r in &self.runs {
            out.push_str(&format!(
                "{}: min detection error {}% at threshold {} ({:?})\n",
                r.tag, r.calibration.min_error_percent, r.calibration.threshold, r.calibration.orientation
            ));
            for s in &r.splits {
                out.push_str(&format!(
                    "  {}/{}: accuracy {} ({}/{})\n",
                    s.train, s.test, s.accuracy, s.correct, s.total
                ));
            }
        }
        for c in &self.consistency {
            out.push_str(&format!(
                "{} days {:?} vs {:?}: |delta min error| {} pp, bound {} pp, {}\n",
                c.motion.map_or("dataset", |m| m.as_str()),
                c.report.day1.day_id,
                c.report.day2.day_id,
                c.report.delta_min_error_pp,
                c.report.bound_pp,
                if c.report.consistent { "pass" } else { "FAIL" }
            ));
        }
        out
    }

    pub fn consistent(&self) -> bool {
        self.consistency.iter().all(|c| c.report.consistent)
    }
}

/// Tracks written files so a failed run can clean up after itself.
struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn open(dir: &Path) -> Result<Self, HarnessError> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.into(), source })?;
        Ok(Outputs { dir: dir.to_path_buf(), created_dir, written: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<String, HarnessError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| HarnessError::Io { path: path.clone(), source })?;
        self.written.push(path);
        Ok(name.to_string())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<String, HarnessError> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|source| HarnessError::Json { path: self.dir.join(name), source })?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    fn names(&self) -> Vec<String> {
        self.written.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect()
    }

    fn discard(self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

struct RunData {
    tag: String,
    motion: Option<Motion>,
    day_id: Option<u32>,
    /// Rows used by the detector stage.
    detector: CsiDataset,
    /// Rows available to the estimator stage (a superset when simulated).
    full: CsiDataset,
}

/// Simulate CSI through the full receiver chain, one capture per snapshot.
pub fn synth_csi_dataset_via_iq(cfg: &ScenarioConfig, cell: &CellConfig) -> Result<CsiDataset, StageError> {
    cfg.validate()?;
    let n = cfg.snapshots_per_category;
    let vectors = (0..cfg.categories.len() * n)
        .into_par_iter()
        .map(|idx| {
            let (cap, _) = synth_iq(cfg, cell, idx / n, idx % n)?;
            Ok(extract_csi(&cap, cell)?)
        })
        .collect::<Result<Vec<_>, StageError>>()?;
    let d = vectors.first().map_or(0, |v| v.len());
    let mut ds = CsiDataset::new(d)?;
    for (idx, v) in vectors.iter().enumerate() {
        ds.push_vector(v, cfg.label(idx / n))?;
    }
    ds.provenance = cfg.provenance();
    ds.provenance.source = "scenario_iq".into();
    Ok(ds)
}

/// First `n` rows of every label, in dataset order.
fn leading_rows(ds: &CsiDataset, n: usize) -> CsiDataset {
    let mut idx: Vec<usize> =
        (1..=crate::dataset::MAX_CATEGORY).flat_map(|c| ds.indices_of(c).into_iter().take(n)).collect();
    idx.sort_unstable();
    ds.subset(&idx)
}

fn prepare_runs(cfg: &ExperimentConfig) -> Result<(Vec<RunData>, Option<usize>), HarnessError> {
    if let Some(path) = &cfg.dataset {
        let ds = load_dataset(path)?;
        let motion = ds.provenance.motion;
        let day_id = ds.provenance.day_id;
        let mut tag = motion.map_or("dataset".to_string(), |m| m.as_str().to_string());
        if let Some(d) = day_id {
            tag.push_str(&format!("_day{d}"));
        }
        return Ok((vec![RunData { tag, motion, day_id, detector: ds.clone(), full: ds }], None));
    }

    let base = cfg.scenario();
    let motions = cfg.motions.clone().unwrap_or_else(|| vec![base.motion]);
    let days = cfg.day_ids.clone().unwrap_or_else(|| vec![base.day_id]);
    let needed = cfg.splits.iter().map(|s| s.train + s.test).max().unwrap_or(0);
    let snapshots = base.snapshots_per_category.max(needed);
    let mut runs = Vec::new();
    for &motion in &motions {
        for &day_id in &days {
            let scen = ScenarioConfig { motion, day_id, snapshots_per_category: snapshots, ..base.clone() };
            info!("simulating {} day {} ({} snapshots per category)", motion, day_id, snapshots);
            let full = match cfg.csi_source {
                CsiSource::Direct => synth_csi_dataset(&scen, &cfg.cell).map_err(stage(Stage::Simulate))?,
                CsiSource::Iq => synth_csi_dataset_via_iq(&scen, &cfg.cell).map_err(stage(Stage::Extract))?,
            };
            let mut detector = leading_rows(&full, base.snapshots_per_category);
            detector.provenance = full.provenance.clone();
            runs.push(RunData {
                tag: format!("{}_day{}", motion, day_id),
                motion: Some(motion),
                day_id: Some(day_id),
                detector,
                full,
            });
        }
    }
    Ok((runs, Some(snapshots)))
}

fn sweep_csv(sweep: &ThresholdSweep) -> String {
    let mut out = String::from("threshold,error_percent\n");
    for (t, e) in sweep.thresholds.iter().zip(&sweep.error_percent) {
        out.push_str(&format!("{t},{e}\n"));
    }
    out
}

fn scores_csv(ds: &CsiDataset, pca: &PcaModel, normalized: &[f64]) -> Result<String, FeatureError> {
    let mut out = String::from("label");
    for i in 0..pca.k {
        out.push_str(&format!(",pc{}", i + 1));
    }
    out.push_str(",pc1_normalized\n");
    for (i, row) in ds.rows().enumerate() {
        out.push_str(&ds.label(i).to_string());
        for s in pca.project(row)?.scores {
            out.push_str(&format!(",{s}"));
        }
        out.push_str(&format!(",{}\n", normalized[i]));
    }
    Ok(out)
}

fn grid_csv(runs: &[RunReport], splits: &[Split]) -> String {
    let mut out = String::from("train,test");
    for r in runs {
        out.push_str(&format!(",{}_accuracy_percent", r.tag));
    }
    out.push('\n');
    for (i, s) in splits.iter().enumerate() {
        out.push_str(&format!("{},{}", s.train, s.test));
        for r in runs {
            out.push_str(&format!(",{}", 100.0 * r.splits[i].accuracy));
        }
        out.push('\n');
    }
    out
}

fn run_one(data: &RunData, cfg: &ExperimentConfig, out: &mut Outputs) -> Result<RunReport, HarnessError> {
    let tag = &data.tag;
    let mut pca = fit_pca(&data.detector, cfg.pca_k).map_err(stage(Stage::Features))?;
    let feats = pca.project_dataset(&data.detector).map_err(stage(Stage::Features))?;
    let pc1: Vec<f64> = feats.iter().map(|f| f.scores[0]).collect();
    let (normalized, norm) = normalize_pc1(&pc1).map_err(stage(Stage::Features))?;
    pca.normalization = Some(norm);

    let occupied = occupancy_labels(data.detector.labels());
    let grid = threshold_grid(cfg.threshold_step).map_err(stage(Stage::Detector))?;
    let sweep = sweep_threshold(&normalized, &occupied, &grid).map_err(stage(Stage::Detector))?;
    let calibration = calibrate(&sweep, data.day_id);
    info!("{tag}: min error {}% at {}", calibration.min_error_percent, calibration.threshold);

    let scores_file = out.write(
        &format!("scores_{tag}.csv"),
        scores_csv(&data.detector, &pca, &normalized).map_err(stage(Stage::Features))?.as_bytes(),
    )?;
    let sweep_file = out.write(&format!("sweep_{tag}.csv"), sweep_csv(&sweep).as_bytes())?;
    let model = ModelFile { pca: pca.clone(), calibration: calibration.clone() };
    let model_file = out.write_json(&format!("model_{tag}.json"), &model)?;

    // Size estimation only makes sense once a crowd has been seen.
    let mut splits = Vec::new();
    if occupied.iter().any(|&o| o) {
        let rows: Vec<GridRow> =
            accuracy_grid(&data.full, &cfg.splits, cfg.pca_k, cfg.knn_neighbors).map_err(stage(Stage::Estimator))?;
        for row in rows {
            let name = format!("confusion_{tag}_{}x{}.csv", row.split.train, row.split.test);
            let confusion_file = out.write(&name, row.confusion.to_csv().as_bytes())?;
            splits.push(SplitResult {
                train: row.split.train,
                test: row.split.test,
                accuracy: row.accuracy,
                correct: row.confusion.trace(),
                total: row.confusion.total(),
                confusion_file,
            });
        }
    }

    Ok(RunReport {
        tag: tag.clone(),
        motion: data.motion,
        day_id: data.day_id,
        detector_rows: data.detector.len(),
        estimator_rows: data.full.len(),
        eigenvalues: pca.eigenvalues.clone(),
        calibration,
        sweep,
        model_file,
        sweep_file,
        scores_file,
        splits,
    })
}

/// Render the standard SVGs for every run from the CSVs in `dir`.
/// Failures are logged and skipped.
pub fn emit_plots(report: &ExperimentReport, dir: &Path) -> Vec<String> {
    type Render = fn(&Path, &Path) -> Result<(), Box<dyn std::error::Error>>;
    let mut written = Vec::new();
    for r in &report.runs {
        let jobs: [(String, &str, Render); 3] = [
            (format!("hist_{}.svg", r.tag), &r.scores_file, plots::histogram_svg),
            (format!("scatter_{}.svg", r.tag), &r.scores_file, plots::scatter_svg),
            (format!("threshold_{}.svg", r.tag), &r.sweep_file, plots::threshold_svg),
        ];
        for (name, input, render) in jobs {
            match render(&dir.join(input), &dir.join(&name)) {
                Ok(()) => written.push(name),
                Err(e) => warn!("plot {name} skipped: {e}"),
            }
        }
    }
    written
}

/// Execute the configured experiment and write all artifacts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    cfg.validate()?;
    let mut out = Outputs::open(&cfg.output_dir)?;
    match run_inner(cfg, &mut out) {
        Ok(report) => Ok(report),
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}

fn run_inner(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<ExperimentReport, HarnessError> {
    let (data, snapshots) = prepare_runs(cfg)?;
    let mut runs = Vec::with_capacity(data.len());
    for d in &data {
        runs.push(run_one(d, cfg, out)?);
    }

    let mut consistency = Vec::new();
    let mut seen: Vec<Option<Motion>> = Vec::new();
    for r in &runs {
        if seen.contains(&r.motion) {
            continue;
        }
        seen.push(r.motion);
        let same: Vec<&RunReport> = runs.iter().filter(|o| o.motion == r.motion).collect();
        if same.len() >= 2 {
            consistency.push(DayComparison {
                motion: r.motion,
                report: consistency_report(&same[0].calibration, &same[1].calibration, cfg.consistency_bound_pp),
            });
        }
    }

    let accuracy_grid_file = if runs.iter().all(|r| r.splits.len() == cfg.splits.len()) && !cfg.splits.is_empty() {
        Some(out.write("accuracy_grid.csv", grid_csv(&runs, &cfg.splits).as_bytes())?)
    } else {
        None
    };

    let mut report = ExperimentReport {
        metadata: Metadata {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            csi_source: cfg.csi_source,
            simulated_snapshots_per_category: snapshots,
        },
        config: cfg.clone(),
        runs,
        consistency,
        accuracy_grid_file,
        artifacts: Vec::new(),
    };
    if cfg.emit_plots {
        for name in emit_plots(&report, &out.dir) {
            out.written.push(out.dir.join(name));
        }
    }
    report.artifacts = out.names();
    report.artifacts.push("report.json".into());
    out.write_json("report.json", &report)?;
    Ok(report)
}
