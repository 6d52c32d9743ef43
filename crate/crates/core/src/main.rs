use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use commsense::dataset::CsiDataset;
use commsense::detector::{calibrate, detect, occupancy_labels, sweep_threshold, threshold_grid, Occupancy};
use commsense::estimator::{accuracy_grid, Split};
use commsense::features::{fit_pca, normalize_pc1};
use commsense::harness::{load_dataset, run_experiment, save_dataset, ExperimentConfig, HarnessError, ModelFile};
use commsense::lte_phy::iq_file::{read_iq, write_iq};
use commsense::lte_phy::{extract_csi, CellConfig};
use commsense::scenario_sim::{synth_csi_dataset, synth_iq, ScenarioConfig};

#[derive(Parser)]
#[command(name = "commsense", version, about = "Crowd detection and size estimation from LTE CSI")]
struct Cli {
    /// Print a machine-readable JSON summary on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Log more (repeat for debug output). Logs go to stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a labeled CSI dataset (and optionally raw IQ captures).
    Simulate(SimulateArgs),
    /// Turn IQ captures into a CSI dataset.
    Extract(ExtractArgs),
    /// Fit PCA and calibrate the presence detector on a dataset.
    Fit(FitArgs),
    /// Apply a fitted model to a dataset.
    Detect(DetectArgs),
    /// Train and evaluate the crowd-size classifier on one split.
    Estimate(EstimateArgs),
    /// Run the full experiment described by a config file.
    Run(RunArgs),
    /// Run two days of the same experiment and compare detector minima.
    CompareDays(RunArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output dataset (CSID).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    cell_id: u16,
    /// Also write IQ captures into this directory.
    #[arg(long)]
    iq_dir: Option<PathBuf>,
    /// IQ captures per category when `--iq-dir` is given.
    #[arg(long, default_value_t = 1)]
    captures: usize,
}

#[derive(Args)]
struct ExtractArgs {
    /// IQ files, each with a `.meta.json` sidecar carrying a label.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = commsense::features::DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = commsense::detector::DEFAULT_GRID_STEP)]
    step: f64,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Per-row decisions as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 500)]
    train: usize,
    #[arg(long, default_value_t = 700)]
    test: usize,
    #[arg(long, default_value_t = commsense::features::DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    neighbors: usize,
    /// Confusion matrix CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment JSON; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure { code: e.exit_code() as u8, message: e.to_string() }
    }
}

fn data_err(e: impl std::fmt::Display) -> Failure {
    Failure { code: 2, message: e.to_string() }
}

fn pipeline_err(e: impl std::fmt::Display) -> Failure {
    Failure { code: 3, message: e.to_string() }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).target(env_logger::Target::Stderr).init();

    let result = match &cli.command {
        Command::Simulate(a) => simulate(a, cli.json),
        Command::Extract(a) => extract(a, cli.json),
        Command::Fit(a) => fit(a, cli.json),
        Command::Detect(a) => detect_cmd(a, cli.json),
        Command::Estimate(a) => estimate(a, cli.json),
        Command::Run(a) => run(a, cli.json, false),
        Command::CompareDays(a) => run(a, cli.json, true),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce() -> String) {
    // A closed pipe on stdout is not worth a panic.
    let mut out = std::io::stdout().lock();
    let _ = if json {
        writeln!(out, "{}", serde_json::to_string_pretty(value).expect("serializable summary"))
    } else {
        write!(out, "{}", text())
    };
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| data_err(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<CsiDataset, Failure> {
    load_dataset(path).map_err(data_err)
}

#[derive(Serialize)]
struct DatasetSummary<'a> {
    path: &'a Path,
    rows: usize,
    dim: usize,
    category_counts: [usize; 8],
    iq_files: Vec<PathBuf>,
}

fn simulate(a: &SimulateArgs, json: bool) -> Result<(), Failure> {
    let mut scen: ScenarioConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = a.seed {
        scen.rng_seed = s;
    }
    scen.validate().map_err(data_err)?;
    let cell = CellConfig::with_cell_id(a.cell_id);
    cell.validate().map_err(data_err)?;
    let ds = synth_csi_dataset(&scen, &cell).map_err(pipeline_err)?;
    save_dataset(&ds, &a.out).map_err(data_err)?;
    info!("wrote {} rows to {}", ds.len(), a.out.display());

    let mut iq_files = Vec::new();
    if let Some(dir) = &a.iq_dir {
        fs::create_dir_all(dir).map_err(|e| data_err(format!("{}: {e}", dir.display())))?;
        for c in 0..scen.categories.len() {
            for s in 0..a.captures.min(scen.snapshots_per_category) {
                let (cap, _) = synth_iq(&scen, &cell, c, s).map_err(pipeline_err)?;
                let path = dir.join(format!("cat{}_snap{s:04}.iq", scen.label(c)));
                write_iq(&path, &cap).map_err(data_err)?;
                iq_files.push(path);
            }
        }
    }
    let summary =
        DatasetSummary { path: &a.out, rows: ds.len(), dim: ds.dim(), category_counts: ds.category_counts(), iq_files };
    emit(json, &summary, || {
        format!(
            "{} rows x {} columns -> {} ({} IQ captures)\n",
            summary.rows,
            summary.dim,
            a.out.display(),
            summary.iq_files.len()
        )
    });
    Ok(())
}

fn extract(a: &ExtractArgs, json: bool) -> Result<(), Failure> {
    let mut ds: Option<CsiDataset> = None;
    for path in &a.files {
        let cap = read_iq(path).map_err(data_err)?;
        let label = cap.label.ok_or_else(|| data_err(format!("{}: sidecar has no label", path.display())))?;
        let cell = CellConfig { sample_rate: cap.sample_rate, ..CellConfig::with_cell_id(cap.cell_id) };
        let csi = extract_csi(&cap, &cell).map_err(|e| pipeline_err(format!("{}: {e}", path.display())))?;
        let set = match &mut ds {
            Some(d) => d,
            None => ds.insert(CsiDataset::new(csi.len()).map_err(data_err)?),
        };
        set.push_vector(&csi, label).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    }
    let mut ds = ds.expect("at least one file");
    ds.provenance.source = "iq_files".into();
    save_dataset(&ds, &a.out).map_err(data_err)?;
    let summary = DatasetSummary {
        path: &a.out,
        rows: ds.len(),
        dim: ds.dim(),
        category_counts: ds.category_counts(),
        iq_files: a.files.clone(),
    };
    emit(json, &summary, || format!("{} captures -> {}\n", summary.rows, a.out.display()));
    Ok(())
}

fn fit(a: &FitArgs, json: bool) -> Result<(), Failure> {
    let ds = load(&a.dataset)?;
    let mut pca = fit_pca(&ds, a.k).map_err(pipeline_err)?;
    let pc1: Vec<f64> = pca.project_dataset(&ds).map_err(pipeline_err)?.iter().map(|f| f.scores[0]).collect();
    let (normalized, norm) = normalize_pc1(&pc1).map_err(pipeline_err)?;
    pca.normalization = Some(norm);
    let grid = threshold_grid(a.step).map_err(data_err)?;
    let sweep = sweep_threshold(&normalized, &occupancy_labels(ds.labels()), &grid).map_err(pipeline_err)?;
    let model = ModelFile { calibration: calibrate(&sweep, ds.provenance.day_id), pca };
    let text = serde_json::to_string_pretty(&model).expect("serializable model") + "\n";
    fs::write(&a.out, text).map_err(|e| data_err(format!("{}: {e}", a.out.display())))?;
    emit(json, &model.calibration, || {
        format!(
            "min detection error {}% at threshold {} ({:?}) -> {}\n",
            model.calibration.min_error_percent,
            model.calibration.threshold,
            model.calibration.orientation,
            a.out.display()
        )
    });
    Ok(())
}

#[derive(Serialize)]
struct DetectSummary {
    rows: usize,
    empty: usize,
    occupied: usize,
    error_percent: f64,
}

fn detect_cmd(a: &DetectArgs, json: bool) -> Result<(), Failure> {
    let model: ModelFile = read_json(&a.model)?;
    let norm = model.pca.normalization.ok_or_else(|| data_err("model has no PC1 normalization"))?;
    let ds = load(&a.dataset)?;
    let mut csv = String::from("row,label,score,decision\n");
    let (mut empty, mut wrong) = (0, 0);
    for (i, row) in ds.rows().enumerate() {
        let score = norm.apply(model.pca.project(row).map_err(data_err)?.scores[0]);
        let decision = detect(&model.calibration, score);
        if decision == Occupancy::Empty {
            empty += 1;
        }
        if (decision == Occupancy::Occupied) != (ds.label(i) != 1) {
            wrong += 1;
        }
        let name = if decision == Occupancy::Empty { "empty" } else { "occupied" };
        csv.push_str(&format!("{i},{},{score},{name}\n", ds.label(i)));
    }
    if let Some(out) = &a.out {
        fs::write(out, csv).map_err(|e| data_err(format!("{}: {e}", out.display())))?;
    }
    let rows = ds.len();
    let summary = DetectSummary {
        rows,
        empty,
        occupied: rows - empty,
        error_percent: if rows == 0 { 0.0 } else { 100.0 * wrong as f64 / rows as f64 },
    };
    emit(json, &summary, || {
        format!("{} empty, {} occupied, error {}%\n", summary.empty, summary.occupied, summary.error_percent)
    });
    Ok(())
}

#[derive(Serialize)]
struct EstimateSummary {
    train: usize,
    test: usize,
    accuracy: f64,
    confusion: [[u64; 8]; 8],
}

fn estimate(a: &EstimateArgs, json: bool) -> Result<(), Failure> {
    let ds = load(&a.dataset)?;
    let split = Split { train: a.train, test: a.test };
    let rows = accuracy_grid(&ds, &[split], a.k, a.neighbors).map_err(pipeline_err)?;
    let row = &rows[0];
    if let Some(out) = &a.out {
        fs::write(out, row.confusion.to_csv()).map_err(|e| data_err(format!("{}: {e}", out.display())))?;
    }
    let summary =
        EstimateSummary { train: a.train, test: a.test, accuracy: row.accuracy, confusion: row.confusion.counts };
    emit(json, &summary, || format!("{}/{}: accuracy {}\n{}", a.train, a.test, row.accuracy, row.confusion.to_csv()));
    Ok(())
}

fn run(a: &RunArgs, json: bool, compare: bool) -> Result<(), Failure> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::from_json_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = a.seed {
        if cfg.dataset.is_some() {
            return Err(data_err("--seed applies to simulated scenarios only"));
        }
        cfg.scenario.get_or_insert_with(ScenarioConfig::default).rng_seed = s;
    }
    if let Some(out) = &a.out {
        cfg.output_dir = out.clone();
    }
    if compare && cfg.day_ids.as_ref().is_none_or(|d| d.len() < 2) {
        if cfg.dataset.is_some() {
            return Err(data_err("compare-days needs a simulated scenario"));
        }
        cfg.day_ids = Some(vec![1, 2]);
    }
    let report = run_experiment(&cfg)?;
    if compare {
        emit(json, &report.consistency, || report.summary());
        if !report.consistent() {
            return Err(pipeline_err("day-to-day difference exceeds the consistency bound"));
        }
    } else {
        emit(json, &report, || report.summary());
    }
    Ok(())
}
